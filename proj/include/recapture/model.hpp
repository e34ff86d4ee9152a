// Copyright 2026 The recapture Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace recap {

inline constexpr int kUnboundedCount = std::numeric_limits<int>::max();
inline constexpr double kUnboundedTime = std::numeric_limits<double>::infinity();

/// One observed subject: strictly increasing capture instants in (0, tau]
/// and a time-constant covariate vector.
struct CaptureHistory {
  std::string subject_id;
  std::vector<double> times;
  std::vector<double> covariates;

  std::size_t captures() const noexcept { return times.size(); }
};

/// Subjects captured at least once, plus the observation window.
struct Dataset {
  double tau = 1.0;
  std::vector<std::string> covariate_names;
  std::vector<CaptureHistory> subjects;
  /// Free-form JSON text carried into reports (e.g. simulation settings).
  std::string provenance;

  std::size_t size() const noexcept { return subjects.size(); }
  std::size_t total_captures() const noexcept;
  std::size_t covariate_count() const noexcept { return covariate_names.size(); }
};

/// Delayed-onset / finite-memory behavioral response. The response is
/// active on (t_{c1}, min(t_{c2}, t_{c1} + delta_b)], i.e. once c1 captures
/// have happened and until either the c2-th capture or delta_b time units
/// after the c1-th. c1 = 1 with c2, delta_b unbounded is the classic
/// permanent trap response.
struct BehaviorSpec {
  int c1 = 1;
  int c2 = kUnboundedCount;
  double delta_b = kUnboundedTime;

  bool classic() const noexcept {
    return c1 == 1 && c2 == kUnboundedCount && delta_b == kUnboundedTime;
  }
  /// Throws InputError on c1 < 1, c2 <= c1 or delta_b <= 0.
  void validate() const;
  std::string label() const;

  friend bool operator==(const BehaviorSpec&, const BehaviorSpec&) = default;
};

/// Which effects of the full hotb intensity are switched on.
struct ModelSpec {
  double tau = 1.0;
  bool frailty = true;       // h: Gamma(alpha, alpha) frailty
  bool covariates = true;    // o: exp(beta'Z)
  bool time_varying = true;  // t: nonparametric baseline
  bool behavior = true;      // b: phi after capture
  BehaviorSpec window;

  /// Accepts "hotb", "M_hotb", "Mhotb", ..., "0" / "M_0" / "M0".
  static ModelSpec from_name(std::string_view name, double tau,
                             BehaviorSpec window = {});
  /// The 16 members of the lattice, largest first.
  static std::vector<std::string> lattice_names();
  std::string name() const;
  void validate() const;
};

/// Model parameters. Positive quantities are stored on the log scale.
/// theta holds the baseline jumps at the ordered distinct capture times.
struct ParamState {
  std::vector<double> beta;
  double log_phi = 0.0;
  double log_alpha = 0.0;
  double log_omega_tau = 0.0;
  std::vector<double> theta;

  double phi() const noexcept;
  double alpha() const noexcept;
  double omega_tau() const noexcept;
};

/// Right-continuous step cumulative baseline Omega(t) = sum_k theta_k I(t_k <= t),
/// held at Omega(tau) beyond tau.
class BaselineFn {
 public:
  BaselineFn() = default;
  /// times must be strictly increasing; jumps nonnegative.
  BaselineFn(std::vector<double> times, std::span<const double> jumps, double tau);

  double operator()(double t) const;
  double total() const noexcept { return total_; }
  double tau() const noexcept { return tau_; }
  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<double>& cumulative() const noexcept { return cumulative_; }

 private:
  std::vector<double> times_;
  std::vector<double> cumulative_;
  double tau_ = 1.0;
  double total_ = 0.0;
};

/// Window (start, end] during which the behavioral factor applies, or
/// nullopt when the subject never reaches c1 captures.
struct ActiveWindow {
  double start;
  double end;
};
std::optional<ActiveWindow> behavioral_window(const CaptureHistory& history,
                                              const BehaviorSpec& spec);

bool behavioral_active(const CaptureHistory& history, double t, const BehaviorSpec& spec);

/// gamma = exp(beta . z)
double linear_predictor(std::span<const double> z, std::span<const double> beta);

/// P = 1 - exp(-rho gamma Omega(tau))
double capture_prob(double rho, double gamma, double omega_tau);

/// Omega(tau) + (1 - phi) (Omega(t_{c1}) - Omega(min(t_{c2}, t_{c1} + delta_b))),
/// with t_j = +inf past the last capture.
double omega_star(const CaptureHistory& history, const BaselineFn& baseline, double phi,
                  const BehaviorSpec& spec);

/// Number of captures made while the behavioral response was active; the
/// exponent of phi in the subject's likelihood. N - 1 for the classic spec.
int behavioral_exponent(const CaptureHistory& history, const BehaviorSpec& spec);

struct IdentifiabilityCheck {
  bool ok = false;
  std::string diagnostic;
};

/// phi is estimable iff some subject makes its (c1+1)-th capture inside
/// (t_{c1}, t_{c1} + delta_b).
IdentifiabilityCheck validate_identifiability(std::span<const CaptureHistory> data,
                                              const BehaviorSpec& spec);

/// Throws InputError on unsorted / duplicated / out-of-window times or an
/// empty history.
void validate_history(const CaptureHistory& history, double tau);
void validate_dataset(const Dataset& data);

}  // namespace recap
