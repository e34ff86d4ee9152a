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

#include "recapture/selection.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "parallel.hpp"
#include "recapture/error.hpp"

namespace recap {

long long CountSummary::n() const {
  long long total = 0;
  for (auto v : f) total += v;
  return total;
}

long long CountSummary::K() const {
  long long total = 0;
  for (std::size_t j = 0; j < f.size(); ++j) total += static_cast<long long>(j + 1) * f[j];
  return total;
}

CountSummary CountSummary::from_dataset(const Dataset& data) {
  CountSummary c;
  for (const auto& h : data.subjects) {
    const auto j = h.captures();
    if (j == 0) continue;
    if (c.f.size() < j) c.f.resize(j, 0);
    ++c.f[j - 1];
  }
  return c;
}

ChaoEstimate chao_lower_bound(const CountSummary& counts) {
  for (auto v : counts.f)
    if (v < 0) throw InputError("chao_lower_bound: negative frequency");
  const double n = static_cast<double>(counts.n());
  if (counts.f.empty() || n < 1.0) throw InputError("chao_lower_bound: empty counts");
  const double f1 = static_cast<double>(counts.f[0]);
  const double f2 = counts.f.size() > 1 ? static_cast<double>(counts.f[1]) : 0.0;
  ChaoEstimate out;
  if (f2 > 0.0) {
    const double r = f1 / f2;
    out.N_hat = n + f1 * f1 / (2.0 * f2);
    out.se = std::sqrt(f2 * (0.25 * r * r * r * r + r * r * r + 0.5 * r * r));
    out.formula = "chao1987";
  } else {
    out.N_hat = n + f1 * (f1 - 1.0) / 2.0;
    const double var = f1 * (f1 - 1.0) / 2.0 + f1 * (2.0 * f1 - 1.0) * (2.0 * f1 - 1.0) / 4.0 -
                       f1 * f1 * f1 * f1 / (4.0 * out.N_hat);
    out.se = std::sqrt(std::max(0.0, var));
    out.formula = "chao-bias-corrected";
  }
  return out;
}

M0Estimate m0_closed_form(const CountSummary& counts) {
  const double n = static_cast<double>(counts.n());
  const double K = static_cast<double>(counts.K());
  if (n < 1.0) throw InputError("m0_closed_form: empty counts");
  if (!(K > n)) throw InputError("m0_closed_form: no recaptures, the M0 estimate diverges");
  const double r = n / K;
  const auto ratio = [](double mu) { return -std::expm1(-mu) / mu; };
  const auto slope = [](double mu) {
    // d/dmu (1 - e^{-mu}) / mu
    return (mu * std::exp(-mu) + std::expm1(-mu)) / (mu * mu);
  };
  double lo = 0.0, hi = 1.0 / r;
  double mu = std::clamp(2.0 * (1.0 - r), 1e-12, hi);
  for (int it = 0; it < 200; ++it) {
    const double h = ratio(mu) - r;
    if (h > 0.0) lo = mu; else hi = mu;
    double next = mu - h / slope(mu);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - mu) <= 1e-15 * mu) {
      mu = next;
      break;
    }
    mu = next;
  }
  return {K / mu, mu};
}

FitResult fit_submodel(const Dataset& data, std::string_view model_name, const BehaviorSpec& window,
                       const EmConfig& cfg) {
  const auto spec = ModelSpec::from_name(model_name, data.tau, window);
  return fit(data, spec, cfg);
}

GridResult grid_search(const Dataset& data, const ModelSpec& base, std::span<const int> c1_set,
                       std::span<const int> c2_set, std::span<const double> delta_set,
                       const EmConfig& cfg) {
  if (c1_set.empty() || c2_set.empty() || delta_set.empty())
    throw InputError("grid_search: every parameter set must be nonempty");
  GridResult out;
  out.model = base.name();
  for (int c1 : c1_set)
    for (int c2 : c2_set)
      for (double db : delta_set) {
        if (c2 != kUnboundedCount && c2 <= c1) continue;
        GridRow row;
        row.window = BehaviorSpec{c1, c2, db};
        row.window.validate();
        out.rows.push_back(row);
      }

  EmConfig cell_cfg = cfg;
  cell_cfg.threads = 1;
  detail::parallel_for(out.rows.size(), cfg.threads, [&](std::size_t r) {
    GridRow& row = out.rows[r];
    const auto check = validate_identifiability(data.subjects, row.window);
    row.identifiable = check.ok;
    row.diagnostic = check.diagnostic;
    if (!check.ok && base.behavior) return;
    try {
      ModelSpec spec = base;
      spec.window = row.window;
      const auto ctx = LikContext::build(data, spec);
      const auto f = fit(ctx, cell_cfg);
      row.fitted = true;
      row.loglik = f.loglik;
      row.converged = f.converged;
      const auto rho = e_step(f.params, ctx);
      row.N_hat = ht_estimate(rho, ctx.gammas(f.params.beta), f.params.omega_tau());
    } catch (const Error& e) {
      row.error = e.what();
    }
  });

  std::optional<double> reference;
  for (auto& row : out.rows) {
    if (!row.fitted) continue;
    if (!reference) reference = row.loglik;
    row.delta_loglik = row.loglik - *reference;
  }
  for (std::size_t r = 0; r < out.rows.size(); ++r) {
    const auto& row = out.rows[r];
    if (!row.fitted || !row.converged) continue;
    if (!out.best || row.loglik > out.rows[*out.best].loglik) out.best = r;
  }
  return out;
}

TestResult lrt(double loglik_full, double loglik_nested, int df) {
  if (df < 1) throw InputError("lrt: df must be >= 1");
  double stat = 2.0 * (loglik_full - loglik_nested);
  if (stat < 0.0) {
    if (-stat > 1e-6 * std::max(1.0, std::abs(loglik_full))) {
      std::ostringstream msg;
      msg << "lrt: nested model fits better than the full model (statistic " << stat
          << "); models are not nested or a fit did not reach its maximum";
      throw NumericError(msg.str());
    }
    stat = 0.0;
  }
  return {stat, boost::math::gamma_q(0.5 * df, 0.5 * stat)};
}

TestResult lrt(const FitResult& full, const FitResult& nested, int df) {
  return lrt(full.loglik, nested.loglik, df);
}

TestResult wald_test(double estimate, double se, double null_value) {
  if (!(se > 0.0) || !std::isfinite(se)) throw NumericError("wald_test: standard error unavailable");
  const double z = (estimate - null_value) / se;
  return {z, std::erfc(std::abs(z) / std::sqrt(2.0))};
}

TestResult wald_test(const FitResult& fit, std::size_t coordinate) {
  const auto est = fit.estimates();
  const auto se = fit.standard_errors();
  if (coordinate >= est.size()) throw InputError("wald_test: coordinate out of range");
  const double null_value = fit.coordinate_index[coordinate] == 0 ? 1.0 : 0.0;
  return wald_test(est[coordinate], se[coordinate], null_value);
}

int parameter_count(const FitResult& fit, std::size_t events) {
  int count = static_cast<int>(fit.coordinate_index.size());
  if (fit.spec.frailty) ++count;
  if (fit.spec.time_varying && events > 0) count += static_cast<int>(events) - 1;
  return count;
}

}  // namespace recap
