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

namespace recap::special {

// Hurwitz zeta  zeta(s, a) = sum_{n>=0} (n + a)^{-s}  for s > 1, a > 0.
//
// All routines go through the scaled series  a^s zeta(s, a) =
// sum_{n>=0} (1 + n/a)^{-s}, which stays O(1) in the regimes the
// likelihood hits (huge shift a when the frailty variance is small, huge
// order s when alpha is large). The leading terms are summed directly and
// the remainder is closed with the Euler-Maclaurin expansion once
// n + a >= max(s, 10).

/// log( a^s * zeta(s, a) ). Throws DomainError unless s > 1 and a > 0.
double log_hurwitz_zeta_scaled(double s, double a);

/// zeta(s, a). Underflows to 0 / overflows to inf where the true value does.
double hurwitz_zeta(double s, double a);

/// log zeta(s, a).
double log_hurwitz_zeta(double s, double a);

/// zeta(s + 1, a) / zeta(s, a), evaluated in log space.
double hurwitz_zeta_ratio(double s, double a);

/// Integral of x^p e^{-b x} / (1 - e^{-c x}) over (0, inf), via
/// Gamma(p + 1) / c^{p + 1} * zeta(p + 1, b / c).
double zeta_integral(double p, double b, double c);
double log_zeta_integral(double p, double b, double c);

double log_gamma(double x);
double digamma(double x);
double trigamma(double x);

/// log(1 - e^{-x}) for x > 0, accurate for tiny x.
double log1mexp(double x);

}  // namespace recap::special
