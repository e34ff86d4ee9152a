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

#include "recapture/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "parallel.hpp"
#include "recapture/error.hpp"
#include "recapture/special.hpp"

namespace recap {
namespace {

std::vector<double> prefix_sum(std::span<const double> v) {
  std::vector<double> out(v.size() + 1, 0.0);
  for (std::size_t k = 0; k < v.size(); ++k) out[k + 1] = out[k] + v[k];
  return out;
}

// log of the frailty-dependent factor of L_i:
//   alpha^alpha Gamma(alpha+N) / (Gamma(alpha) (gamma Omega)^{alpha+N})
//     * zeta(alpha+N, (gamma Omega* + alpha) / (gamma Omega)),
// rearranged so that large alpha does not cancel catastrophically.
double log_frailty_factor(double alpha, int captures, double gamma, double omega_tau,
                          double omega_star) {
  const double exposure = gamma * omega_star;
  const double shift = std::log1p(exposure / alpha);
  double out = -alpha * shift;
  for (int j = 0; j < captures; ++j) out += std::log1p(j / alpha) - shift;
  const double s = alpha + captures;
  const double q = (exposure + alpha) / (gamma * omega_tau);
  return out + special::log_hurwitz_zeta_scaled(s, q);
}

double log_gamma_density(double rho, double alpha) {
  return alpha * std::log(alpha) - std::lgamma(alpha) + (alpha - 1.0) * std::log(rho) -
         alpha * rho;
}

double subject_term(std::size_t i, const ParamState& params, const LikContext& ctx,
                    double gamma, double omega_star, double log_phi) {
  double out = ctx.exponent[i] * log_phi + ctx.captures[i] * std::log(gamma);
  for (std::size_t e = ctx.event_offset[i]; e < ctx.event_offset[i + 1]; ++e) {
    const double jump = params.theta[ctx.event_index[e]];
    if (!(jump > 0.0)) {
      std::ostringstream msg;
      msg << "zero baseline jump at observed capture time " << ctx.event_times[ctx.event_index[e]];
      throw NumericError(msg.str());
    }
    out += std::log(jump);
  }
  const double omega_tau = params.omega_tau();
  if (ctx.spec.frailty)
    return out + log_frailty_factor(params.alpha(), ctx.captures[i], gamma, omega_tau, omega_star);
  return out - gamma * omega_star - special::log1mexp(gamma * omega_tau);
}

}  // namespace

LikContext LikContext::build(const Dataset& data, const ModelSpec& spec) {
  validate_dataset(data);
  spec.validate();
  if (std::abs(spec.tau - data.tau) > 1e-12 * std::max(1.0, data.tau))
    throw InputError("model tau does not match dataset tau");

  LikContext ctx;
  ctx.spec = spec;
  ctx.n = data.size();
  ctx.p = spec.covariates ? data.covariate_count() : 0;
  ctx.tau = data.tau;
  if (ctx.p) ctx.covariate_names = data.covariate_names;

  std::vector<double> all;
  all.reserve(data.total_captures());
  for (const auto& h : data.subjects) all.insert(all.end(), h.times.begin(), h.times.end());
  std::sort(all.begin(), all.end());
  for (std::size_t j = 0; j < all.size();) {
    std::size_t m = j;
    while (m < all.size() && all[m] == all[j]) ++m;
    ctx.event_times.push_back(all[j]);
    ctx.dN.push_back(static_cast<double>(m - j));
    j = m;
  }
  ctx.total_captures = static_cast<double>(all.size());
  ctx.rate_share.resize(ctx.event_times.size());
  for (std::size_t k = 0; k < ctx.event_times.size(); ++k) {
    const double prev = k ? ctx.event_times[k - 1] : 0.0;
    const double next = k + 1 < ctx.event_times.size() ? ctx.event_times[k] : ctx.tau;
    ctx.rate_share[k] = (next - prev) / ctx.tau;
  }

  const auto index_of = [&](double t) {
    return static_cast<std::size_t>(
        std::lower_bound(ctx.event_times.begin(), ctx.event_times.end(), t) -
        ctx.event_times.begin());
  };
  const auto first_after = [&](double t) {
    return static_cast<std::size_t>(
        std::upper_bound(ctx.event_times.begin(), ctx.event_times.end(), t) -
        ctx.event_times.begin());
  };

  ctx.captures.resize(ctx.n);
  ctx.exponent.resize(ctx.n);
  ctx.event_offset.assign(ctx.n + 1, 0);
  ctx.active_lo.resize(ctx.n);
  ctx.active_hi.resize(ctx.n);
  ctx.active_start.resize(ctx.n);
  ctx.active_end.resize(ctx.n);
  ctx.z.resize(ctx.n * ctx.p);
  for (std::size_t i = 0; i < ctx.n; ++i) {
    const auto& h = data.subjects[i];
    ctx.captures[i] = static_cast<int>(h.captures());
    ctx.exponent[i] = behavioral_exponent(h, spec.window);
    ctx.exponent_total += ctx.exponent[i];
    for (double t : h.times) ctx.event_index.push_back(index_of(t));
    ctx.event_offset[i + 1] = ctx.event_index.size();
    if (const auto w = behavioral_window(h, spec.window)) {
      ctx.active_start[i] = w->start;
      ctx.active_end[i] = w->end;
      ctx.active_lo[i] = first_after(w->start);
      ctx.active_hi[i] = std::max(ctx.active_lo[i], first_after(w->end));
    } else {
      ctx.active_start[i] = ctx.active_end[i] = kUnboundedTime;
      ctx.active_lo[i] = ctx.active_hi[i] = 0;
    }
    std::copy_n(h.covariates.begin(), ctx.p, ctx.z.begin() + static_cast<std::ptrdiff_t>(i * ctx.p));
  }
  return ctx;
}

std::vector<double> LikContext::gammas(std::span<const double> beta) const {
  if (beta.size() != p) throw InputError("beta has wrong length");
  std::vector<double> out(n, 1.0);
  if (p == 0) return out;
  for (std::size_t i = 0; i < n; ++i) out[i] = linear_predictor(covariates(i), beta);
  return out;
}

std::vector<double> LikContext::omega_stars(const ParamState& params) const {
  if (params.theta.size() != events()) throw InputError("theta has wrong length");
  const auto cum = prefix_sum(params.theta);
  const double phi = params.phi();
  const double omega = params.omega_tau();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = omega + (phi - 1.0) * (cum[active_hi[i]] - cum[active_lo[i]]);
  return out;
}

std::vector<double> LikContext::proportional_theta(double omega_tau) const {
  std::vector<double> out(dN.size());
  for (std::size_t k = 0; k < dN.size(); ++k) out[k] = omega_tau * dN[k] / total_captures;
  return out;
}

std::vector<double> LikContext::constant_rate_theta(double omega_tau) const {
  std::vector<double> out(rate_share.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = omega_tau * rate_share[k];
  return out;
}

BaselineFn LikContext::baseline(const ParamState& params) const {
  return BaselineFn(event_times, params.theta, tau);
}

double subject_cond_loglik(std::size_t i, const ParamState& params, const LikContext& ctx) {
  if (i >= ctx.n) throw InputError("subject index out of range");
  const auto gam = ctx.p ? linear_predictor(ctx.covariates(i), params.beta) : 1.0;
  const auto cum = prefix_sum(params.theta);
  const double ostar = params.omega_tau() +
                       (params.phi() - 1.0) * (cum[ctx.active_hi[i]] - cum[ctx.active_lo[i]]);
  return subject_term(i, params, ctx, gam, ostar, params.log_phi);
}

double total_cond_loglik(const ParamState& params, const LikContext& ctx, int threads) {
  const auto gam = ctx.gammas(params.beta);
  const auto ostar = ctx.omega_stars(params);
  std::vector<double> terms(ctx.n);
  try {
    detail::parallel_for(ctx.n, threads, [&](std::size_t i) {
      terms[i] = subject_term(i, params, ctx, gam[i], ostar[i], params.log_phi);
    });
  } catch (const Error&) {
    return -std::numeric_limits<double>::infinity();
  }
  double total = 0.0;
  for (double t : terms) total += t;
  return std::isnan(total) ? -std::numeric_limits<double>::infinity() : total;
}

double eccl_loglik(const ParamState& params, std::span<const double> rho_hat,
                   const LikContext& ctx) {
  if (rho_hat.size() != ctx.n) throw InputError("rho_hat has wrong length");
  const auto gam = ctx.gammas(params.beta);
  const auto ostar = ctx.omega_stars(params);
  const double omega = params.omega_tau();
  const double alpha = params.alpha();
  double total = 0.0;
  for (std::size_t i = 0; i < ctx.n; ++i) {
    const double rho = rho_hat[i];
    if (!(rho > 0.0)) throw InputError("rho_hat must be strictly positive");
    double term = ctx.exponent[i] * params.log_phi + ctx.captures[i] * std::log(gam[i]);
    for (std::size_t e = ctx.event_offset[i]; e < ctx.event_offset[i + 1]; ++e)
      term += std::log(params.theta[ctx.event_index[e]]);
    term += ctx.captures[i] * std::log(rho) - rho * gam[i] * ostar[i] -
            special::log1mexp(rho * gam[i] * omega);
    if (ctx.spec.frailty) term += log_gamma_density(rho, alpha);
    total += term;
  }
  return total;
}

double helper_A(double gamma, double rho, double omega_tau) {
  const double u = rho * gamma * omega_tau;
  if (!(u > 0.0)) throw NumericError("helper_A: zero exposure (Omega(tau) = 0)");
  return 1.0 / std::expm1(u);
}

double helper_B(double phi, std::span<const double> gammas, std::span<const double> rhos,
                double omega_tau, double t, const LikContext& ctx) {
  if (gammas.size() != ctx.n || rhos.size() != ctx.n)
    throw InputError("helper_B: vectors must have one entry per subject");
  double out = 0.0;
  for (std::size_t h = 0; h < ctx.n; ++h) {
    const bool active = t > ctx.active_start[h] && t <= ctx.active_end[h];
    out += rhos[h] * gammas[h] * ((active ? phi : 1.0) + helper_A(gammas[h], rhos[h], omega_tau));
  }
  return out;
}

ProfileEval profile_eccl(const LikContext& ctx, double phi, double omega_tau,
                         std::span<const double> beta, std::span<const double> rho_hat,
                         bool with_gradient) {
  if (rho_hat.size() != ctx.n) throw InputError("rho_hat has wrong length");
  if (!(phi > 0.0) || !(omega_tau > 0.0)) throw InputError("phi and Omega(tau) must be positive");
  const std::size_t n = ctx.n, p = ctx.p, K = ctx.events();
  const double total_k = ctx.total_captures;
  const double omega = omega_tau;
  const auto gam = ctx.gammas(beta);

  // Per-subject pieces.
  std::vector<double> x(n), a(n);
  double X = 0.0, D = 0.0, log_term = 0.0, rho_term = 0.0, lin_term = 0.0, D_omega = 0.0;
  std::vector<double> Xb(p, 0.0), Db(p, 0.0), Nz(p, 0.0), xza(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rho_hat[i] * gam[i];
    const double u = x[i] * omega;
    a[i] = 1.0 / std::expm1(u);
    X += x[i];
    D += x[i] * a[i];
    D_omega -= x[i] * x[i] * a[i] * (1.0 + a[i]);
    log_term += special::log1mexp(u);
    rho_term += ctx.captures[i] * std::log(rho_hat[i]);
    lin_term += ctx.captures[i] * std::log(gam[i]);
    for (std::size_t h = 0; h < p; ++h) {
      const double zih = ctx.z[i * p + h];
      Xb[h] += x[i] * zih;
      Db[h] += zih * x[i] * (a[i] - u * a[i] * (1.0 + a[i]));
      Nz[h] += ctx.captures[i] * zih;
      xza[h] += x[i] * zih * a[i];
    }
  }

  // E_k = sum of x_i over subjects whose behavioral factor applies at t_(k);
  // Eb_{k,h} the same weighted by Z_ih.
  std::vector<double> E(K + 1, 0.0), Eb((K + 1) * p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto lo = ctx.active_lo[i], hi = ctx.active_hi[i];
    if (lo >= hi) continue;
    E[lo] += x[i];
    E[hi] -= x[i];
    for (std::size_t h = 0; h < p; ++h) {
      Eb[lo * p + h] += x[i] * ctx.z[i * p + h];
      Eb[hi * p + h] -= x[i] * ctx.z[i * p + h];
    }
  }
  for (std::size_t k = 1; k <= K; ++k) {
    E[k] += E[k - 1];
    for (std::size_t h = 0; h < p; ++h) Eb[k * p + h] += Eb[(k - 1) * p + h];
  }

  ProfileEval out;
  out.theta.resize(K);
  std::vector<double> C(K);
  for (std::size_t k = 0; k < K; ++k) C[k] = X + (phi - 1.0) * E[k];

  const double base = ctx.exponent_total * std::log(phi) + lin_term + rho_term - log_term;

  if (!ctx.spec.time_varying) {
    double sC = 0.0, sE = 0.0;
    std::vector<double> sCb(p, 0.0);
    double jumps_log = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double share = ctx.rate_share[k];
      out.theta[k] = omega * share;
      jumps_log += ctx.dN[k] * std::log(out.theta[k]);
      sC += share * C[k];
      sE += share * E[k];
      for (std::size_t h = 0; h < p; ++h) sCb[h] += share * (Xb[h] + (phi - 1.0) * Eb[k * p + h]);
    }
    out.value = base + jumps_log - omega * sC;
    out.constraint_residual = 0.0;
    if (with_gradient) {
      out.grad.resize(2 + p);
      out.grad[0] = ctx.exponent_total / phi - omega * sE;
      out.grad[1] = total_k / omega - sC - D;
      for (std::size_t h = 0; h < p; ++h) out.grad[2 + h] = Nz[h] - omega * sCb[h] - omega * xza[h];
    }
    return out;
  }

  std::vector<double> B(K);
  double S = 0.0, R = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    B[k] = C[k] + D;
    S += ctx.dN[k] / B[k];
    R += ctx.dN[k] / (B[k] * B[k]);
  }
  double jumps_log = 0.0, thetaC = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    out.theta[k] = omega * (ctx.dN[k] / B[k]) / S;
    jumps_log += ctx.dN[k] * std::log(out.theta[k]);
    thetaC += out.theta[k] * C[k];
  }
  out.value = base + jumps_log - thetaC;
  out.constraint_residual = S - omega;
  if (!with_gradient) return out;

  const double coef = total_k / S - omega * total_k / (S * S);
  out.grad.resize(2 + p);

  double g1 = 0.0, g2 = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    g1 += ctx.dN[k] * E[k] / B[k];
    g2 += ctx.dN[k] * E[k] / (B[k] * B[k]);
  }
  out.grad[0] = ctx.exponent_total / phi - g1 + coef * g2;
  out.grad[1] = total_k / omega - total_k / S - D_omega * S + coef * D_omega * R + omega * D_omega;
  for (std::size_t h = 0; h < p; ++h) {
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double dB = Xb[h] + (phi - 1.0) * Eb[k * p + h] + Db[h];
      b1 += ctx.dN[k] * dB / B[k];
      b2 += ctx.dN[k] * dB / (B[k] * B[k]);
    }
    out.grad[2 + h] = Nz[h] - omega * xza[h] - b1 + coef * b2 + omega * Db[h];
  }
  return out;
}

std::vector<double> score_vector(const ParamState& params, std::span<const double> rho_hat,
                                 const LikContext& ctx) {
  return profile_eccl(ctx, params.phi(), params.omega_tau(), params.beta, rho_hat, true).grad;
}

}  // namespace recap
