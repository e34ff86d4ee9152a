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

#include "recapture/model.hpp"

namespace recap {

/// Parameter-independent quantities shared by every likelihood evaluation
/// for one (dataset, model) pair.
struct LikContext {
  ModelSpec spec;
  std::size_t n = 0;  // observed subjects
  std::size_t p = 0;  // covariates in the model (0 unless spec.covariates)
  double tau = 1.0;
  std::vector<std::string> covariate_names;

  std::vector<double> event_times;  // distinct ordered capture times t_(k)
  std::vector<double> dN;           // captures at each t_(k)
  double total_captures = 0.0;      // K

  std::vector<int> captures;   // N_i(tau)
  std::vector<int> exponent;   // behavioral exponent e_i
  double exponent_total = 0.0;
  std::vector<std::size_t> event_offset;  // subject i owns event_index[offset[i], offset[i+1])
  std::vector<std::size_t> event_index;   // k(ij)
  // Behavioral factor applies to subject i at t_(k) for k in [active_lo, active_hi).
  std::vector<std::size_t> active_lo;
  std::vector<std::size_t> active_hi;
  std::vector<double> active_start;  // window in time, (start, end]; +inf when never active
  std::vector<double> active_end;
  // Spacings (t_(k) - t_(k-1)) / tau, the last one running to tau: jumps of a
  // constant-rate baseline that is exact at every event time.
  std::vector<double> rate_share;
  std::vector<double> z;  // n x p, row-major

  static LikContext build(const Dataset& data, const ModelSpec& spec);

  std::size_t events() const noexcept { return event_times.size(); }
  std::span<const double> covariates(std::size_t i) const {
    return {z.data() + i * p, p};
  }
  /// gamma_i = exp(beta' Z_i); all ones when p == 0.
  std::vector<double> gammas(std::span<const double> beta) const;
  /// Omega*_i from the jumps in params.theta and phi.
  std::vector<double> omega_stars(const ParamState& params) const;
  /// Jumps proportional to dN scaled to sum to omega_tau (the constant-baseline shape).
  std::vector<double> proportional_theta(double omega_tau) const;
  /// Jumps omega_tau * rate_share.
  std::vector<double> constant_rate_theta(double omega_tau) const;
  BaselineFn baseline(const ParamState& params) const;
};

/// Log-likelihood contribution of subject i, conditional on capture and
/// marginal over the Gamma frailty (closed form through the Hurwitz zeta).
/// With the frailty switched off the rho = 1 limit is used.
/// Throws NumericError when a capture falls on a zero baseline jump.
double subject_cond_loglik(std::size_t i, const ParamState& params, const LikContext& ctx);

/// Sum of subject terms in subject order; -inf if any term cannot be evaluated.
double total_cond_loglik(const ParamState& params, const LikContext& ctx, int threads = 1);

/// Expected complete conditional log-likelihood with the frailties replaced
/// by rho_hat (includes the Gamma log-density of rho_hat when the frailty is on).
double eccl_loglik(const ParamState& params, std::span<const double> rho_hat,
                   const LikContext& ctx);

/// A = e^{-rho gamma Omega} / (1 - e^{-rho gamma Omega}).
double helper_A(double gamma, double rho, double omega_tau);

/// B(t) = sum_h rho_h gamma_h [phi^{I_h(t)} + A_h], I_h(t) the behavioral
/// indicator of subject h at time t.
double helper_B(double phi, std::span<const double> gammas, std::span<const double> rhos,
                double omega_tau, double t, const LikContext& ctx);

/// The ECCL with the baseline profiled out: jumps theta_k ∝ dN_k / B_k
/// (nonparametric baseline) or theta_k ∝ dN_k (constant baseline), rescaled
/// to sum to Omega(tau). Coordinates of the gradient are (phi, Omega(tau),
/// beta_1..beta_p); the log-density of rho_hat is left out.
struct ProfileEval {
  double value = 0.0;
  std::vector<double> grad;
  std::vector<double> theta;
  /// sum_k dN_k / B_k - Omega(tau): zero when the profiled jumps already
  /// honour the sum constraint without rescaling.
  double constraint_residual = 0.0;
};

ProfileEval profile_eccl(const LikContext& ctx, double phi, double omega_tau,
                         std::span<const double> beta, std::span<const double> rho_hat,
                         bool with_gradient = true);

/// Analytic score of the profiled ECCL at (phi, Omega(tau), beta) of params.
std::vector<double> score_vector(const ParamState& params, std::span<const double> rho_hat,
                                 const LikContext& ctx);

}  // namespace recap
