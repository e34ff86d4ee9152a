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
#include <optional>
#include <span>

#include "recapture/em.hpp"

namespace recap {

struct PopEstimate {
  std::size_t n_observed = 0;
  double N_hat = 0.0;
  double var_binomial = 0.0;  // randomness of n given the weights
  double var_param = 0.0;     // delta-method term from the parameter estimates
  double se = 0.0;
  double ci_low = 0.0;  // Wald 95%, floored at n_observed
  double ci_high = 0.0;
  std::optional<double> catchable_fraction;
  std::optional<double> scaled_estimate;  // N_hat / catchable_fraction
};

/// Horvitz-Thompson  N_hat = sum_i 1 / (1 - exp(-rho_i gamma_i Omega(tau))).
double ht_estimate(std::span<const double> rho_hat, std::span<const double> gammas,
                   double omega_tau);

struct VarianceComponents {
  double var_binomial = 0.0;
  double var_param = 0.0;
  std::vector<double> gradient;  // dN_hat / d(free coordinates)
};

/// sum (1 - w_i) / w_i^2 for the capture probabilities w_i.
double binomial_variance(std::span<const double> weights);

/// N_hat as a function of (phi, Omega(tau), beta): a final E-step at the
/// perturbed parameters followed by the HT sum. Omega(tau) perturbations
/// rescale the baseline jumps proportionally.
double population_map(const FitResult& fit, const LikContext& ctx, std::span<const double> natural,
                      int threads = 1);

/// Both variance terms; the delta-method gradient uses central differences
/// with relative step fd_step. Throws NumericError if the information is singular.
VarianceComponents variance_N(const FitResult& fit, const LikContext& ctx, double fd_step = 1e-5,
                              int threads = 1);

double scaled_indirect_estimate(double N_hat, double fraction);

PopEstimate estimate_population(const FitResult& fit, const LikContext& ctx,
                                std::optional<double> catchable_fraction = std::nullopt,
                                int threads = 1);

}  // namespace recap
