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
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "recapture/error.hpp"
#include "recapture/likelihood.hpp"
#include "recapture/model.hpp"

namespace recap {

/// How alpha is refreshed after each M-step.
enum class AlphaMode {
  PlugIn,    // maximize prod_i f(rho_hat_i) (Gamma density at the posterior means)
  Marginal,  // maximize the closed-form conditional likelihood in alpha
};

struct EmConfig {
  int max_iter = 500;
  double loglik_rel_tol = 1e-8;
  int nr_max_iter = 50;
  double nr_step_tol = 1e-10;
  double fd_step = 1e-6;
  double damping = 0.5;  // rho_hat update shrink factor after a likelihood decrease
  int max_damping_steps = 8;
  double alpha_max = 1e8;
  AlphaMode alpha_mode = AlphaMode::PlugIn;
  int threads = 1;

  void validate() const;
};

/// Free coordinates of the Newton-Raphson system, in the order
/// (phi, Omega(tau), beta_1..beta_p) with frozen ones left out.
struct Coordinates {
  bool phi = true;
  std::vector<bool> beta_free;  // one flag per covariate in the context

  static Coordinates for_model(const LikContext& ctx);
  std::size_t size() const;
  /// Index into the full (phi, Omega, beta...) vector for each free coordinate.
  std::vector<std::size_t> full_indices() const;
};

struct FitResult {
  ModelSpec spec;
  ParamState params;
  std::vector<double> rho_hat;  // frailty means used by the final M-step
  double loglik = 0.0;
  std::vector<double> loglik_trace;
  std::vector<std::string> coordinate_names;  // rows/cols of info_matrix
  std::vector<std::size_t> coordinate_index;  // positions in (phi, Omega, beta...)
  Eigen::MatrixXd info_matrix;                // observed information, natural scale
  std::vector<double> score;                  // score at the optimum, free coordinates
  double constraint_residual = 0.0;           // sum_k theta_k - Omega(tau)
  bool converged = false;
  bool alpha_capped = false;
  int iterations = 0;
  int damped_iterations = 0;
  int alpha_fallbacks = 0;  // steps where plug-in alpha was replaced by the likelihood maximizer
  std::vector<std::string> warnings;

  /// Estimates in coordinate order.
  std::vector<double> estimates() const;
  /// Standard errors from the inverse information (NaN when singular).
  std::vector<double> standard_errors() const;
};

/// Newton-Raphson gave up; carries the last state that was reached.
class StepFailure : public Error {
 public:
  StepFailure(const std::string& what, ParamState last)
      : Error(ErrorKind::StepFailure, what), last_(std::move(last)) {}
  const ParamState& last_state() const noexcept { return last_; }

 private:
  ParamState last_;
};

/// Posterior mean of subject i's frailty given its capture history.
double e_step_rho(std::size_t i, const ParamState& params, const LikContext& ctx);
std::vector<double> e_step(const ParamState& params, const LikContext& ctx, int threads = 1);

/// Nelson-Aalen type jumps theta_k = dN_k / B(t_(k)).
std::vector<double> baseline_update(const ParamState& params, std::span<const double> rho_hat,
                                    const LikContext& ctx);

/// Maximizes the profiled ECCL over the free coordinates by damped Newton
/// steps on the analytic score, with a central-difference Jacobian.
/// Returns the new state with theta set to the profiled jumps.
ParamState m_step(const ParamState& params, std::span<const double> rho_hat,
                  const LikContext& ctx, const EmConfig& cfg);
/// Same, over an explicit set of free coordinates.
ParamState m_step_with(const ParamState& params, std::span<const double> rho_hat,
                       const LikContext& ctx, const EmConfig& cfg, const Coordinates& coords);

struct AlphaUpdate {
  double alpha = 1.0;
  bool capped = false;
};

/// Maximizer of sum_i log f(rho_i) for the Gamma(alpha, alpha) density.
AlphaUpdate alpha_update(std::span<const double> rho_hat, double alpha_max = 1e8);

/// Observed information  -d score / d(free coordinates)  at (params, rho_hat).
Eigen::MatrixXd information_matrix(const ParamState& params, std::span<const double> rho_hat,
                                   const LikContext& ctx, const Coordinates& coords,
                                   double fd_step);

/// Starting point: beta = 0, phi = 1, Omega(tau) = K / n, alpha = 1,
/// theta proportional to dN (constant-rate jumps when the baseline is not
/// time varying).
ParamState initial_state(const LikContext& ctx);

FitResult fit(const LikContext& ctx, const EmConfig& cfg = {});
FitResult fit(const Dataset& data, const ModelSpec& spec, const EmConfig& cfg = {});

}  // namespace recap
