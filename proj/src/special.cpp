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

#include "recapture/special.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "recapture/error.hpp"

namespace recap::special {
namespace {

// B_{2j} / (2j)!  for j = 1..12.
constexpr std::array<double, 12> kBernoulliOverFactorial = {
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -1.0 / 1.8924375803183791606e9,
    1.0 / 7.47242496e10,
    -1.0 / 2.950130727918164224e12,
    1.0 / 1.1646782814350067249e14,
    -1.0 / 4.5979787224074726105e15,
    1.0 / 1.8152105401943546773e17,
    -1.0 / 7.1661652561756670113e18,
};

constexpr double kRelEps = 1e-17;

void check_zeta_domain(double s, double a, const char* who) {
  if (!(s > 1.0) || !(a > 0.0) || !std::isfinite(s) || !std::isfinite(a)) {
    std::ostringstream msg;
    msg << who << ": requires s > 1 and a > 0 (got s=" << s << ", a=" << a << ")";
    throw DomainError(msg.str());
  }
}

}  // namespace

double log_hurwitz_zeta_scaled(double s, double a) {
  check_zeta_domain(s, a, "hurwitz_zeta");
  const double switch_at = std::max(s, 10.0);
  double sum = 0.0;
  double n = 0.0;
  for (;;) {
    if (n + a >= switch_at) break;
    const double term = std::exp(-s * std::log1p(n / a));
    sum += term;
    n += 1.0;
    if (term <= kRelEps * sum) {
      // Remaining terms are bounded by f(n) (1 + (n + a) / (s - 1)).
      const double next = std::exp(-s * std::log1p(n / a));
      if (next * (1.0 + (n + a) / (s - 1.0)) <= kRelEps * sum) return std::log(sum);
    }
  }

  // Euler-Maclaurin tail starting at n.
  const double x = n + a;
  const double fx = std::exp(-s * std::log1p(n / a));
  double tail = x * fx / (s - 1.0) + 0.5 * fx;
  double poch = s;         // s (s+1) ... (s+2j-2)
  double xpow = fx / x;    // fx / x^{2j-1}
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < kBernoulliOverFactorial.size(); ++j) {
    const double term = kBernoulliOverFactorial[j] * poch * xpow;
    if (std::abs(term) >= prev) break;  // asymptotic series started diverging
    tail += term;
    prev = std::abs(term);
    if (prev <= kRelEps * (sum + tail)) break;
    const double k = 2.0 * static_cast<double>(j) + 1.0;
    poch *= (s + k) * (s + k + 1.0);
    xpow /= x * x;
  }
  return std::log(sum + tail);
}

double log_hurwitz_zeta(double s, double a) {
  return log_hurwitz_zeta_scaled(s, a) - s * std::log(a);
}

double hurwitz_zeta(double s, double a) { return std::exp(log_hurwitz_zeta(s, a)); }

double hurwitz_zeta_ratio(double s, double a) {
  return std::exp(log_hurwitz_zeta_scaled(s + 1.0, a) - log_hurwitz_zeta_scaled(s, a)) / a;
}

double log_zeta_integral(double p, double b, double c) {
  if (!(p > 0.0) || !(b > 0.0) || !(c > 0.0)) {
    std::ostringstream msg;
    msg << "zeta_integral: requires positive arguments (got " << p << ", " << b << ", " << c << ")";
    throw DomainError(msg.str());
  }
  return std::lgamma(p + 1.0) - (p + 1.0) * std::log(c) + log_hurwitz_zeta(p + 1.0, b / c);
}

double zeta_integral(double p, double b, double c) {
  return std::exp(log_zeta_integral(p, b, c));
}

double log_gamma(double x) {
  if (!(x > 0.0)) throw DomainError("log_gamma: requires x > 0");
  return std::lgamma(x);
}

double digamma(double x) {
  if (!(x > 0.0)) throw DomainError("digamma: requires x > 0");
  return boost::math::digamma(x);
}

double trigamma(double x) {
  if (!(x > 0.0)) throw DomainError("trigamma: requires x > 0");
  return boost::math::trigamma(x);
}

double log1mexp(double x) {
  // Maechler's switch point.
  return x <= M_LN2 ? std::log(-std::expm1(-x)) : std::log1p(-std::exp(-x));
}

}  // namespace recap::special
