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

#include "recapture/em.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "parallel.hpp"
#include "recapture/special.hpp"

namespace recap {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Full coordinate vector (phi, Omega, beta...) from a state.
std::vector<double> natural_point(const ParamState& s) {
  std::vector<double> v{s.phi(), s.omega_tau()};
  v.insert(v.end(), s.beta.begin(), s.beta.end());
  return v;
}

struct NewtonSystem {
  const LikContext& ctx;
  std::span<const double> rho;
  const Coordinates& coords;
  std::vector<std::size_t> idx;
  std::vector<double> full;  // current full natural point (phi, Omega, beta...)

  // u: free coordinates on the working scale (log phi, log Omega, beta).
  std::vector<double> to_full(const Eigen::VectorXd& u) const {
    std::vector<double> v = full;
    for (std::size_t j = 0; j < idx.size(); ++j)
      v[idx[j]] = idx[j] < 2 ? std::exp(u[static_cast<Eigen::Index>(j)]) : u[static_cast<Eigen::Index>(j)];
    return v;
  }
  Eigen::VectorXd from_full(const std::vector<double>& v) const {
    Eigen::VectorXd u(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j)
      u[static_cast<Eigen::Index>(j)] = idx[j] < 2 ? std::log(v[idx[j]]) : v[idx[j]];
    return u;
  }
  ProfileEval eval(const std::vector<double>& v, bool grad) const {
    return profile_eccl(ctx, v[0], v[1], std::span<const double>(v).subspan(2), rho, grad);
  }
  double value(const Eigen::VectorXd& u) const { return eval(to_full(u), false).value; }
  Eigen::VectorXd gradient(const Eigen::VectorXd& u) const {
    const auto v = to_full(u);
    const auto pe = eval(v, true);
    Eigen::VectorXd g(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j)
      g[static_cast<Eigen::Index>(j)] = pe.grad[idx[j]] * (idx[j] < 2 ? v[idx[j]] : 1.0);
    return g;
  }
};

Eigen::MatrixXd symmetric_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& u, const Eigen::VectorXd& steps) {
  const auto m = u.size();
  Eigen::MatrixXd J(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::VectorXd up = u, dn = u;
    up[j] += steps[j];
    dn[j] -= steps[j];
    J.col(j) = (f(up) - f(dn)) / (2.0 * steps[j]);
  }
  return 0.5 * (J + J.transpose());
}

}  // namespace

void EmConfig::validate() const {
  if (max_iter < 1 || nr_max_iter < 1 || max_damping_steps < 0)
    throw InputError("EmConfig: iteration limits must be positive");
  if (!(loglik_rel_tol > 0.0) || !(nr_step_tol > 0.0) || !(fd_step > 0.0))
    throw InputError("EmConfig: tolerances must be positive");
  if (!(damping > 0.0) || damping > 1.0) throw InputError("EmConfig: damping must lie in (0, 1]");
  if (!(alpha_max > 1.0)) throw InputError("EmConfig: alpha_max must exceed 1");
}

Coordinates Coordinates::for_model(const LikContext& ctx) {
  Coordinates c;
  c.phi = ctx.spec.behavior;
  c.beta_free.assign(ctx.p, true);
  return c;
}

std::size_t Coordinates::size() const {
  return (phi ? 1u : 0u) + 1u +
         static_cast<std::size_t>(std::count(beta_free.begin(), beta_free.end(), true));
}

std::vector<std::size_t> Coordinates::full_indices() const {
  std::vector<std::size_t> out;
  if (phi) out.push_back(0);
  out.push_back(1);
  for (std::size_t h = 0; h < beta_free.size(); ++h)
    if (beta_free[h]) out.push_back(2 + h);
  return out;
}

std::vector<double> FitResult::estimates() const {
  const auto full = natural_point(params);
  std::vector<double> out;
  for (auto j : coordinate_index) out.push_back(full[j]);
  return out;
}

std::vector<double> FitResult::standard_errors() const {
  const auto m = info_matrix.rows();
  std::vector<double> out(static_cast<std::size_t>(m), std::numeric_limits<double>::quiet_NaN());
  if (m == 0) return out;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(info_matrix);
  if (!lu.isInvertible()) return out;
  const Eigen::MatrixXd cov = lu.inverse();
  for (Eigen::Index j = 0; j < m; ++j)
    if (cov(j, j) > 0.0) out[static_cast<std::size_t>(j)] = std::sqrt(cov(j, j));
  return out;
}

double e_step_rho(std::size_t i, const ParamState& params, const LikContext& ctx) {
  if (!ctx.spec.frailty) return 1.0;
  const double gamma = ctx.p ? linear_predictor(ctx.covariates(i), params.beta) : 1.0;
  const double omega = params.omega_tau();
  double active = 0.0;
  for (std::size_t k = ctx.active_lo[i]; k < ctx.active_hi[i]; ++k) active += params.theta[k];
  const double ostar = omega + (params.phi() - 1.0) * active;
  const double alpha = params.alpha();
  const double s = alpha + ctx.captures[i];
  const double q = (gamma * ostar + alpha) / (gamma * omega);
  if (!(q > 0.0)) throw NumericError("e_step: nonpositive zeta shift");
  return s / (alpha + gamma * ostar) *
         std::exp(special::log_hurwitz_zeta_scaled(s + 1.0, q) -
                  special::log_hurwitz_zeta_scaled(s, q));
}

std::vector<double> e_step(const ParamState& params, const LikContext& ctx, int threads) {
  std::vector<double> rho(ctx.n, 1.0);
  if (!ctx.spec.frailty) return rho;
  const auto gam = ctx.gammas(params.beta);
  const auto ostar = ctx.omega_stars(params);
  const double omega = params.omega_tau();
  const double alpha = params.alpha();
  detail::parallel_for(ctx.n, threads, [&](std::size_t i) {
    const double s = alpha + ctx.captures[i];
    const double q = (gam[i] * ostar[i] + alpha) / (gam[i] * omega);
    rho[i] = s / (alpha + gam[i] * ostar[i]) *
             std::exp(special::log_hurwitz_zeta_scaled(s + 1.0, q) -
                      special::log_hurwitz_zeta_scaled(s, q));
  });
  return rho;
}

std::vector<double> baseline_update(const ParamState& params, std::span<const double> rho_hat,
                                    const LikContext& ctx) {
  if (rho_hat.size() != ctx.n) throw InputError("rho_hat has wrong length");
  const auto gam = ctx.gammas(params.beta);
  const double phi = params.phi();
  const double omega = params.omega_tau();
  const std::size_t K = ctx.events();
  double base = 0.0;
  std::vector<double> active(K + 1, 0.0);
  for (std::size_t i = 0; i < ctx.n; ++i) {
    if (!(rho_hat[i] > 0.0)) throw InputError("rho_hat must be strictly positive");
    const double x = rho_hat[i] * gam[i];
    base += x * (1.0 + helper_A(gam[i], rho_hat[i], omega));
    active[ctx.active_lo[i]] += x;
    active[ctx.active_hi[i]] -= x;
  }
  std::vector<double> theta(K);
  double running = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    running += active[k];
    const double denom = base + (phi - 1.0) * running;
    if (!(denom > 0.0)) throw NumericError("baseline_update: nonpositive denominator");
    theta[k] = ctx.dN[k] / denom;
  }
  return theta;
}

ParamState m_step(const ParamState& params, std::span<const double> rho_hat,
                  const LikContext& ctx, const EmConfig& cfg) {
  return m_step_with(params, rho_hat, ctx, cfg, Coordinates::for_model(ctx));
}

ParamState m_step_with(const ParamState& params, std::span<const double> rho_hat,
                       const LikContext& ctx, const EmConfig& cfg, const Coordinates& coords) {
  NewtonSystem sys{ctx, rho_hat, coords, coords.full_indices(), natural_point(params)};
  const auto m = static_cast<Eigen::Index>(sys.idx.size());
  Eigen::VectorXd u = sys.from_full(sys.full);
  double f = sys.value(u);
  if (!std::isfinite(f)) throw StepFailure("m_step: objective not finite at start", params);

  const auto state_at = [&](const Eigen::VectorXd& point) {
    ParamState out = params;
    const auto v = sys.to_full(point);
    out.log_phi = std::log(v[0]);
    out.log_omega_tau = std::log(v[1]);
    out.beta.assign(v.begin() + 2, v.end());
    out.theta = sys.eval(v, false).theta;
    return out;
  };

  const Eigen::VectorXd steps = Eigen::VectorXd::Constant(m, cfg.fd_step);
  const auto grad_fn = [&](const Eigen::VectorXd& point) { return sys.gradient(point); };
  bool small_step = false;
  for (int it = 0; it < cfg.nr_max_iter; ++it) {
    const Eigen::VectorXd g = sys.gradient(u);
    const Eigen::MatrixXd neg_h = -symmetric_jacobian(grad_fn, u, steps);

    // Newton direction, shifted towards gradient ascent when -H is not PD.
    Eigen::VectorXd dir;
    double shift = 0.0;
    const double scale = std::max(1e-12, neg_h.diagonal().cwiseAbs().maxCoeff());
    for (int tries = 0; tries < 40; ++tries) {
      Eigen::LLT<Eigen::MatrixXd> llt(neg_h + shift * Eigen::MatrixXd::Identity(m, m));
      if (llt.info() == Eigen::Success) {
        dir = llt.solve(g);
        if (dir.allFinite()) break;
      }
      shift = shift == 0.0 ? 1e-10 * scale : shift * 10.0;
    }
    if (dir.size() != m || !dir.allFinite())
      throw StepFailure("m_step: could not form an ascent direction", state_at(u));
    // Keep log-scale moves bounded.
    const double biggest = dir.cwiseAbs().maxCoeff();
    if (biggest > 2.0) dir *= 2.0 / biggest;

    double t = 1.0;
    Eigen::VectorXd trial;
    double f_trial = -kInf;
    const double slack = 1e-13 * std::max(1.0, std::abs(f));
    for (int ls = 0; ls < 60; ++ls) {
      trial = u + t * dir;
      f_trial = sys.value(trial);
      if (std::isfinite(f_trial) && f_trial >= f - slack) break;
      t *= 0.5;
    }
    if (!(std::isfinite(f_trial) && f_trial >= f - slack))
      throw StepFailure("m_step: line search failed to improve the profiled ECCL", state_at(u));

    const double moved = (trial - u).cwiseAbs().maxCoeff();
    u = trial;
    f = f_trial;
    if (moved < cfg.nr_step_tol) {
      small_step = true;
      break;
    }
  }
  if (!small_step)
    throw StepFailure("m_step: Newton-Raphson did not converge in nr_max_iter steps", state_at(u));
  return state_at(u);
}

AlphaUpdate alpha_update(std::span<const double> rho_hat, double alpha_max) {
  if (rho_hat.empty()) throw InputError("alpha_update: empty rho_hat");
  double mean_log = 0.0, mean = 0.0;
  for (double r : rho_hat) {
    if (!(r > 0.0)) throw InputError("alpha_update: rho_hat must be positive");
    mean_log += std::log(r);
    mean += r;
  }
  mean_log /= static_cast<double>(rho_hat.size());
  mean /= static_cast<double>(rho_hat.size());
  // Stationarity: log(a) - digamma(a) = target, with target >= 0 by Jensen.
  const double target = mean - mean_log - 1.0;
  const auto gap = [](double a) { return std::log(a) - special::digamma(a); };
  if (!(target > gap(alpha_max))) return {alpha_max, true};

  // gap() decreases from +inf to 0; bracket in log(alpha) and polish by Newton.
  double lo = std::log(1e-12), hi = std::log(alpha_max);
  double y = std::log(std::clamp(
      (3.0 - target + std::sqrt((target - 3.0) * (target - 3.0) + 24.0 * target)) / (12.0 * target),
      1e-12, alpha_max));
  for (int it = 0; it < 200; ++it) {
    const double a = std::exp(y);
    const double h = gap(a) - target;
    if (h > 0.0) lo = y; else hi = y;
    const double dh = 1.0 - a * special::trigamma(a);  // d gap / d log a
    double next = y - h / dh;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::abs(next - y) < 1e-14 * std::max(1.0, std::abs(y))) {
      y = next;
      break;
    }
    y = next;
  }
  return {std::exp(y), false};
}

Eigen::MatrixXd information_matrix(const ParamState& params, std::span<const double> rho_hat,
                                   const LikContext& ctx, const Coordinates& coords,
                                   double fd_step) {
  const auto idx = coords.full_indices();
  const auto m = static_cast<Eigen::Index>(idx.size());
  const auto base = natural_point(params);
  Eigen::VectorXd u(m), steps(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double v = base[idx[static_cast<std::size_t>(j)]];
    u[j] = v;
    steps[j] = fd_step * std::max(std::abs(v), idx[static_cast<std::size_t>(j)] < 2 ? 1e-12 : 1.0);
  }
  const auto score_at = [&](const Eigen::VectorXd& point) {
    std::vector<double> v = base;
    for (Eigen::Index j = 0; j < m; ++j) v[idx[static_cast<std::size_t>(j)]] = point[j];
    const auto pe = profile_eccl(ctx, v[0], v[1], std::span<const double>(v).subspan(2), rho_hat);
    Eigen::VectorXd g(m);
    for (Eigen::Index j = 0; j < m; ++j) g[j] = pe.grad[idx[static_cast<std::size_t>(j)]];
    return g;
  };
  return -symmetric_jacobian(score_at, u, steps);
}

ParamState initial_state(const LikContext& ctx) {
  ParamState s;
  s.beta.assign(ctx.p, 0.0);
  s.log_phi = 0.0;
  s.log_omega_tau = std::log(ctx.total_captures / static_cast<double>(ctx.n));
  s.log_alpha = ctx.spec.frailty ? 0.0 : kInf;
  s.theta = ctx.spec.time_varying ? ctx.proportional_theta(s.omega_tau())
                                   : ctx.constant_rate_theta(s.omega_tau());
  return s;
}

FitResult fit(const Dataset& data, const ModelSpec& spec, const EmConfig& cfg) {
  return fit(LikContext::build(data, spec), cfg);
}

FitResult fit(const LikContext& ctx, const EmConfig& cfg) {
  cfg.validate();
  FitResult out;
  out.spec = ctx.spec;
  if (ctx.spec.behavior) {
    // Histories are not kept in the context; the windows carry the same information.
    bool ok = false;
    for (std::size_t i = 0; i < ctx.n && !ok; ++i) {
      if (ctx.captures[i] < ctx.spec.window.c1 + 1) continue;
      const double start = ctx.active_start[i];
      // the (c1+1)-th capture is the first capture strictly after the window start
      for (std::size_t e = ctx.event_offset[i]; e < ctx.event_offset[i + 1]; ++e) {
        const double t = ctx.event_times[ctx.event_index[e]];
        if (t > start) {
          ok = t < start + ctx.spec.window.delta_b;
          break;
        }
      }
    }
    if (!ok)
      throw IdentifiabilityError("behavioral effect not identifiable for " +
                                 ctx.spec.window.label() +
                                 ": no subject recaptured inside the response window");
  }

  Coordinates coords = Coordinates::for_model(ctx);
  for (std::size_t h = 0; h < ctx.p; ++h) {
    double lo = kInf, hi = -kInf;
    for (std::size_t i = 0; i < ctx.n; ++i) {
      lo = std::min(lo, ctx.z[i * ctx.p + h]);
      hi = std::max(hi, ctx.z[i * ctx.p + h]);
    }
    if (lo == hi) {
      coords.beta_free[h] = false;
      out.warnings.push_back("covariate '" + ctx.covariate_names[h] +
                             "' is constant: confounded with Omega(tau), coefficient not "
                             "identifiable and held at 0");
    }
  }

  ParamState state = initial_state(ctx);
  std::vector<double> rho(ctx.n, 1.0);
  double ll = total_cond_loglik(state, ctx, cfg.threads);
  out.loglik_trace.push_back(ll);
  const auto slack = [](double v) { return 1e-10 * std::max(1.0, std::abs(v)); };

  const auto refresh = [&](ParamState cand, std::span<const double> r, AlphaMode mode) {
    if (ctx.spec.frailty) {
      if (mode == AlphaMode::PlugIn) {
        const auto au = alpha_update(r, cfg.alpha_max);
        cand.log_alpha = std::log(au.alpha);
      } else {
        ParamState probe = cand;
        if (ctx.spec.time_varying) probe.theta = baseline_update(cand, r, ctx);
        const auto neg = [&](double la) {
          probe.log_alpha = la;
          return -total_cond_loglik(probe, ctx, cfg.threads);
        };
        const auto best = boost::math::tools::brent_find_minima(
            neg, std::log(1e-4), std::log(cfg.alpha_max), 40);
        cand.log_alpha = best.first;
      }
    }
    cand.theta = ctx.spec.time_varying ? baseline_update(cand, r, ctx)
                                       : ctx.constant_rate_theta(cand.omega_tau());
    return cand;
  };

  for (int it = 1; it <= cfg.max_iter; ++it) {
    const std::vector<double> target = e_step(state, ctx, cfg.threads);
    double lambda = 1.0;
    ParamState best_state;
    std::vector<double> best_rho;
    double best_ll = -kInf;
    bool accepted = false;
    for (int attempt = 0; attempt <= cfg.max_damping_steps; ++attempt) {
      std::vector<double> trial_rho(ctx.n);
      for (std::size_t i = 0; i < ctx.n; ++i)
        trial_rho[i] = rho[i] + lambda * (target[i] - rho[i]);
      ParamState cand;
      try {
        cand = m_step_with(state, trial_rho, ctx, cfg, coords);
      } catch (const StepFailure& e) {
        cand = e.last_state();
        out.warnings.push_back("iteration " + std::to_string(it) + ": " + e.what());
      }
      ParamState fresh = refresh(cand, trial_rho, cfg.alpha_mode);
      double cand_ll = total_cond_loglik(fresh, ctx, cfg.threads);
      if (cand_ll < ll - slack(ll) && ctx.spec.frailty && cfg.alpha_mode == AlphaMode::PlugIn) {
        // plug-in alpha overshot; pick alpha on the conditional likelihood instead
        ParamState alt = refresh(cand, trial_rho, AlphaMode::Marginal);
        const double alt_ll = total_cond_loglik(alt, ctx, cfg.threads);
        if (alt_ll > cand_ll) {
          fresh = std::move(alt);
          cand_ll = alt_ll;
          ++out.alpha_fallbacks;
        }
      }
      if (cand_ll > best_ll) {
        best_ll = cand_ll;
        best_state = fresh;
        best_rho = trial_rho;
      }
      if (cand_ll >= ll - slack(ll)) {
        accepted = true;
        break;
      }
      if (attempt == 0) ++out.damped_iterations;
      lambda *= cfg.damping;
    }
    if (lambda < 1.0 && accepted) {
      std::ostringstream msg;
      msg << "iteration " << it << ": likelihood decreased, rho_hat update damped to " << lambda;
      out.warnings.push_back(msg.str());
    }
    if (!accepted) {
      out.warnings.push_back("iteration " + std::to_string(it) +
                             ": likelihood decreased under every damped rho_hat update; "
                             "stopped at the last increasing iterate");
      out.iterations = it;
      out.converged = true;
      break;
    }
    const double prev = ll;
    state = std::move(best_state);
    rho = std::move(best_rho);
    ll = best_ll;
    out.loglik_trace.push_back(ll);
    out.iterations = it;
    if (std::abs(ll - prev) <= cfg.loglik_rel_tol * std::max(1.0, std::abs(prev))) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged) out.warnings.push_back("EM did not converge within max_iter iterations");

  out.params = state;
  out.rho_hat = rho;
  out.loglik = ll;
  out.alpha_capped = ctx.spec.frailty && state.alpha() >= cfg.alpha_max * (1.0 - 1e-12);
  if (out.alpha_capped)
    out.warnings.push_back("alpha reached its cap: frailty variance estimated as zero");

  const auto idx = coords.full_indices();
  out.coordinate_index = idx;
  for (auto j : idx) {
    if (j == 0) out.coordinate_names.push_back("phi");
    else if (j == 1) out.coordinate_names.push_back("Omega_tau");
    else out.coordinate_names.push_back("beta[" + ctx.covariate_names[j - 2] + "]");
  }
  const auto pe = profile_eccl(ctx, state.phi(), state.omega_tau(), state.beta, rho);
  for (auto j : idx) out.score.push_back(pe.grad[j]);
  double jumps = 0.0;
  for (double t : state.theta) jumps += t;
  out.constraint_residual = jumps - state.omega_tau();
  out.info_matrix = information_matrix(state, rho, ctx, coords, cfg.fd_step);
  Eigen::LLT<Eigen::MatrixXd> llt(out.info_matrix);
  if (llt.info() != Eigen::Success)
    out.warnings.push_back("observed information is not positive definite at the estimate");
  return out;
}

}  // namespace recap
