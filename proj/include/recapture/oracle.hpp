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
#include <vector>

#include "recapture/error.hpp"
#include "recapture/likelihood.hpp"
#include "recapture/model.hpp"

// Brute-force reference implementations. Slow; meant for tests on small
// instances only.
namespace recap::oracle {

/// Quadrature did not reach its tolerance, or the integrand misbehaved.
struct OracleError : Error {
  explicit OracleError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

/// zeta(s, a) by direct summation in long double, with the remainder
/// bounded by its integral and trapezoid corrections.
double hurwitz_series(double s, double a);

/// log of  int_0^inf x^{m-1} e^{-b x} / (1 - e^{-c x}) dx  (m > 1, b, c > 0)
/// by adaptive Gauss-Kronrod, split at x = m / b.
double log_frailty_integral(double m, double b, double c);

/// zeta_integral(p, b, c) by quadrature.
double zeta_integral(double p, double b, double c);

/// Subject i's conditional log-likelihood, integrating the frailty
/// numerically against the Gamma(alpha, alpha) density.
double subject_cond_loglik(const Dataset& data, std::size_t i, const ParamState& params,
                           const ModelSpec& spec);
double cond_loglik(const Dataset& data, const ParamState& params, const ModelSpec& spec);

/// E(rho | history) by quadrature of the posterior.
double posterior_mean(const Dataset& data, std::size_t i, const ParamState& params,
                      const ModelSpec& spec);

}  // namespace recap::oracle
