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

#include "recapture/population.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "recapture/error.hpp"

namespace recap {
namespace {

ParamState perturbed_state(const FitResult& fit, std::span<const double> natural) {
  ParamState s = fit.params;
  const double omega0 = s.omega_tau();
  s.log_phi = std::log(natural[0]);
  s.log_omega_tau = std::log(natural[1]);
  s.beta.assign(natural.begin() + 2, natural.end());
  const double scale = natural[1] / omega0;
  for (auto& t : s.theta) t *= scale;
  return s;
}

}  // namespace

double ht_estimate(std::span<const double> rho_hat, std::span<const double> gammas,
                   double omega_tau) {
  if (rho_hat.size() != gammas.size()) throw InputError("ht_estimate: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < rho_hat.size(); ++i) {
    const double w = capture_prob(rho_hat[i], gammas[i], omega_tau);
    if (!(w > 0.0)) throw NumericError("ht_estimate: zero capture probability");
    total += 1.0 / w;
  }
  return total;
}

double binomial_variance(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || w > 1.0) throw NumericError("binomial_variance: weight outside (0, 1]");
    total += (1.0 - w) / (w * w);
  }
  return total;
}

double population_map(const FitResult& fit, const LikContext& ctx, std::span<const double> natural,
                      int threads) {
  const ParamState s = perturbed_state(fit, natural);
  const auto rho = e_step(s, ctx, threads);
  return ht_estimate(rho, ctx.gammas(s.beta), s.omega_tau());
}

VarianceComponents variance_N(const FitResult& fit, const LikContext& ctx, double fd_step,
                              int threads) {
  VarianceComponents out;
  const ParamState& s = fit.params;
  const auto rho = e_step(s, ctx, threads);
  const auto gam = ctx.gammas(s.beta);
  std::vector<double> w(ctx.n);
  for (std::size_t i = 0; i < ctx.n; ++i) w[i] = capture_prob(rho[i], gam[i], s.omega_tau());
  out.var_binomial = binomial_variance(w);

  const auto m = fit.info_matrix.rows();
  if (m == 0) return out;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(fit.info_matrix);
  if (!lu.isInvertible()) {
    std::ostringstream msg;
    msg << "variance_N: singular information matrix (rank " << lu.rank() << " of " << m << ")";
    throw NumericError(msg.str());
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(fit.info_matrix);
  const auto& sv = svd.singularValues();
  const double cond = sv[0] / sv[sv.size() - 1];
  if (!(cond < 1e14)) {
    std::ostringstream msg;
    msg << "variance_N: information matrix is numerically singular (condition number " << cond
        << ")";
    throw NumericError(msg.str());
  }

  std::vector<double> base{s.phi(), s.omega_tau()};
  base.insert(base.end(), s.beta.begin(), s.beta.end());
  Eigen::VectorXd grad(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto at = fit.coordinate_index[static_cast<std::size_t>(j)];
    const double h = at < 2 ? fd_step * base[at] : fd_step * std::max(1.0, std::abs(base[at]));
    auto up = base, dn = base;
    up[at] += h;
    dn[at] -= h;
    grad[j] = (population_map(fit, ctx, up, threads) - population_map(fit, ctx, dn, threads)) /
              (2.0 * h);
    out.gradient.push_back(grad[j]);
  }
  out.var_param = grad.dot(lu.solve(grad));
  if (out.var_param < 0.0)
    throw NumericError("variance_N: information matrix is not positive definite");
  return out;
}

double scaled_indirect_estimate(double N_hat, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw InputError("catchable fraction must lie in (0, 1]");
  return N_hat / fraction;
}

PopEstimate estimate_population(const FitResult& fit, const LikContext& ctx,
                                std::optional<double> catchable_fraction, int threads) {
  if (catchable_fraction) scaled_indirect_estimate(1.0, *catchable_fraction);  // validates
  PopEstimate out;
  out.n_observed = ctx.n;
  const auto rho = e_step(fit.params, ctx, threads);
  out.N_hat = ht_estimate(rho, ctx.gammas(fit.params.beta), fit.params.omega_tau());
  const auto v = variance_N(fit, ctx, 1e-5, threads);
  out.var_binomial = v.var_binomial;
  out.var_param = v.var_param;
  out.se = std::sqrt(out.var_binomial + out.var_param);
  const double n = static_cast<double>(ctx.n);
  out.ci_low = std::max(n, out.N_hat - 1.96 * out.se);
  out.ci_high = std::max(n, out.N_hat + 1.96 * out.se);
  if (catchable_fraction) {
    out.catchable_fraction = catchable_fraction;
    out.scaled_estimate = scaled_indirect_estimate(out.N_hat, *catchable_fraction);
  }
  return out;
}

}  // namespace recap
