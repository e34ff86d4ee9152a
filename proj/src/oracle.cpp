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

#include "recapture/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace recap::oracle {
namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
using TS = boost::math::quadrature::tanh_sinh<double>;
constexpr double kTol = 1e-13;
constexpr unsigned kDepth = 15;

// log(x) - log(1 - e^{-x}); smooth at 0 where it behaves like x / 2.
double regular_part(double x) {
  if (x < 1e-5) return x / 2.0 - x * x / 24.0;
  return std::log(x) - std::log(-std::expm1(-x));
}

template <class F>
double checked(F&& f, double lo, double hi, const char* what) {
  double err = 0.0, l1 = 0.0;
  const double v = GK::integrate(f, lo, hi, kDepth, kTol, &err, &l1);
  if (!std::isfinite(v) || !(v > 0.0) || err > 1e-10 * v) {
    std::ostringstream msg;
    msg << "quadrature failed (" << what << "): value " << v << ", error " << err;
    throw OracleError(msg.str());
  }
  return v;
}

void require_positive(double v) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw OracleError("integrand not finite and nonnegative");
}

const CaptureHistory& subject(const Dataset& data, std::size_t i) {
  if (i >= data.size()) throw InputError("subject index out of range");
  return data.subjects[i];
}

struct SubjectParts {
  double constant = 0.0;  // e log phi + N log gamma + sum log theta
  double gamma = 1.0;
  double omega_star = 0.0;
  int captures = 0;
};

SubjectParts subject_parts(const Dataset& data, std::size_t i, const ParamState& params,
                           const ModelSpec& spec) {
  const auto& h = subject(data, i);
  std::vector<double> times;
  for (const auto& s : data.subjects) times.insert(times.end(), s.times.begin(), s.times.end());
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  if (times.size() != params.theta.size()) throw InputError("theta does not match the event times");
  const BaselineFn baseline(times, params.theta, data.tau);
  const BehaviorSpec window = spec.behavior ? spec.window : BehaviorSpec{};
  const double phi = spec.behavior ? params.phi() : 1.0;

  SubjectParts out;
  out.captures = static_cast<int>(h.times.size());
  out.gamma = spec.covariates ? linear_predictor(h.covariates, params.beta) : 1.0;
  out.omega_star = omega_star(h, baseline, phi, window);
  out.constant = behavioral_exponent(h, window) * std::log(phi) + out.captures * std::log(out.gamma);
  for (double t : h.times) {
    const auto k = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t) -
                                            times.begin());
    out.constant += std::log(params.theta[k]);
  }
  return out;
}

}  // namespace

double hurwitz_series(double s, double a) {
  if (!(s > 1.0) || !(a > 0.0)) throw DomainError("hurwitz_series needs s > 1, a > 0");
  constexpr long terms = 200000;
  long double sum = 0.0L;
  long n = 0;
  for (; n < terms; ++n) {
    const long double term = std::pow(static_cast<long double>(n) + a, -static_cast<long double>(s));
    sum += term;
    if (term < 1e-22L * sum) return static_cast<double>(sum);
  }
  // sum_{n >= M} (n + a)^{-s} = int_M^inf + f(M) / 2 - f'(M) / 12 + O(f'''(M))
  const long double x = static_cast<long double>(n) + a;
  const long double ls = s;
  sum += std::pow(x, 1.0L - ls) / (ls - 1.0L) + std::pow(x, -ls) / 2.0L +
         ls * std::pow(x, -ls - 1.0L) / 12.0L;
  return static_cast<double>(sum);
}

double log_frailty_integral(double m, double b, double c) {
  if (!(m > 1.0) || !(b > 0.0) || !(c > 0.0))
    throw DomainError("log_frailty_integral needs m > 1, b > 0, c > 0");
  const double split = m / b;
  // Log-integrand: (m - 1) log x - b x - log(1 - e^{-c x}).
  auto log_f = [&](double x) { return (m - 2.0) * std::log(x) - std::log(c) - b * x + regular_part(c * x); };
  const double ref = log_f(split);

  // On (0, split] substitute y = x^{m-1}, so x^{m-2} dx = dy / (m - 1). The
  // integrand is then bounded but only Hoelder at y = 0, which tanh-sinh
  // handles and Gauss-Kronrod does not.
  const double e = m - 1.0;
  auto lower = [&](double y) {
    const double x = y > 0.0 ? std::pow(y, 1.0 / e) : 0.0;
    const double v = std::exp(-std::log(c) - b * x + regular_part(c * x) - ref) / e;
    require_positive(v);
    return v;
  };
  auto upper = [&](double x) {
    const double v = std::exp(log_f(x) - ref);
    require_positive(v);
    return v;
  };
  double err = 0.0, l1 = 0.0;
  std::size_t levels = 0;
  const double lo = TS().integrate(lower, 0.0, std::pow(split, e), kTol, &err, &l1, &levels);
  if (!std::isfinite(lo) || !(lo > 0.0) || err > 1e-10 * lo) {
    std::ostringstream msg;
    msg << "quadrature failed (lower): value " << lo << ", error " << err;
    throw OracleError(msg.str());
  }
  const double hi = checked(upper, split, std::numeric_limits<double>::infinity(), "upper");
  return ref + std::log(lo + hi);
}

double zeta_integral(double p, double b, double c) {
  if (!(p > 0.0)) throw DomainError("zeta_integral needs p > 0");
  return std::exp(log_frailty_integral(p + 1.0, b, c));
}

double subject_cond_loglik(const Dataset& data, std::size_t i, const ParamState& params,
                           const ModelSpec& spec) {
  const auto parts = subject_parts(data, i, params, spec);
  const double omega_tau = params.omega_tau();
  if (!spec.frailty)
    return parts.constant - parts.gamma * parts.omega_star -
           std::log(-std::expm1(-parts.gamma * omega_tau));
  const double alpha = params.alpha();
  return parts.constant + alpha * std::log(alpha) - std::lgamma(alpha) +
         log_frailty_integral(alpha + parts.captures, parts.gamma * parts.omega_star + alpha,
                              parts.gamma * omega_tau);
}

double cond_loglik(const Dataset& data, const ParamState& params, const ModelSpec& spec) {
  double out = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) out += subject_cond_loglik(data, i, params, spec);
  return out;
}

double posterior_mean(const Dataset& data, std::size_t i, const ParamState& params,
                      const ModelSpec& spec) {
  if (!spec.frailty) return 1.0;
  const auto parts = subject_parts(data, i, params, spec);
  const double alpha = params.alpha();
  const double b = parts.gamma * parts.omega_star + alpha;
  const double c = parts.gamma * params.omega_tau();
  const double m = alpha + parts.captures;
  return std::exp(log_frailty_integral(m + 1.0, b, c) - log_frailty_integral(m, b, c));
}

}  // namespace recap::oracle
