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

#include <cmath>
#include <ctime>
#include <iomanip>
#include <limits>
#include <sstream>

#include "recapture/error.hpp"
#include "recapture/io.hpp"

namespace recap {
namespace {

using nlohmann::json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double get_num(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return kNaN;
  return j.at(key).get<double>();
}

json window_json(const BehaviorSpec& w) {
  return {{"c1", w.c1},
          {"c2", w.c2 == kUnboundedCount ? json(nullptr) : json(w.c2)},
          {"delta_b", num(w.delta_b)}};
}

BehaviorSpec window_from(const json& j) {
  BehaviorSpec w;
  w.c1 = j.at("c1").get<int>();
  w.c2 = j.at("c2").is_null() ? kUnboundedCount : j.at("c2").get<int>();
  w.delta_b = j.at("delta_b").is_null() ? kUnboundedTime : j.at("delta_b").get<double>();
  return w;
}

json population_json(const PopEstimate& p) {
  return {{"n_observed", p.n_observed},
          {"N_hat", num(p.N_hat)},
          {"var_binomial", num(p.var_binomial)},
          {"var_param", num(p.var_param)},
          {"se", num(p.se)},
          {"ci_low", num(p.ci_low)},
          {"ci_high", num(p.ci_high)},
          {"catchable_fraction", p.catchable_fraction ? num(*p.catchable_fraction) : json(nullptr)},
          {"scaled_estimate", p.scaled_estimate ? num(*p.scaled_estimate) : json(nullptr)}};
}

PopEstimate population_from(const json& j) {
  PopEstimate p;
  p.n_observed = j.at("n_observed").get<std::size_t>();
  p.N_hat = get_num(j, "N_hat");
  p.var_binomial = get_num(j, "var_binomial");
  p.var_param = get_num(j, "var_param");
  p.se = get_num(j, "se");
  p.ci_low = get_num(j, "ci_low");
  p.ci_high = get_num(j, "ci_high");
  if (!j.at("catchable_fraction").is_null()) p.catchable_fraction = j.at("catchable_fraction").get<double>();
  if (!j.at("scaled_estimate").is_null()) p.scaled_estimate = j.at("scaled_estimate").get<double>();
  return p;
}

json grid_json(const GridResult& g) {
  json rows = json::array();
  for (const auto& r : g.rows) {
    json o = window_json(r.window);
    o["identifiable"] = r.identifiable;
    o["diagnostic"] = r.diagnostic;
    o["fitted"] = r.fitted;
    o["loglik"] = num(r.loglik);
    o["delta_loglik"] = num(r.delta_loglik);
    o["N_hat"] = num(r.N_hat);
    o["converged"] = r.converged;
    o["error"] = r.error;
    rows.push_back(o);
  }
  return {{"model", g.model},
          {"delta_loglik_definition", "loglik - loglik(first fitted row)"},
          {"rows", rows},
          {"best", g.best ? json(*g.best) : json(nullptr)}};
}

GridResult grid_from(const json& j) {
  GridResult g;
  g.model = j.at("model").get<std::string>();
  for (const auto& o : j.at("rows")) {
    GridRow r;
    r.window = window_from(o);
    r.identifiable = o.at("identifiable").get<bool>();
    r.diagnostic = o.at("diagnostic").get<std::string>();
    r.fitted = o.at("fitted").get<bool>();
    r.loglik = get_num(o, "loglik");
    r.delta_loglik = get_num(o, "delta_loglik");
    r.N_hat = get_num(o, "N_hat");
    r.converged = o.at("converged").get<bool>();
    r.error = o.at("error").get<std::string>();
    g.rows.push_back(std::move(r));
  }
  if (!j.at("best").is_null()) g.best = j.at("best").get<std::size_t>();
  return g;
}

json compare_json(const CompareSection& c) {
  json models = json::array();
  for (const auto& m : c.models)
    models.push_back({{"model", m.model},
                      {"fitted", m.fitted},
                      {"loglik", num(m.loglik)},
                      {"parameters", m.parameters},
                      {"aic", num(m.aic)},
                      {"N_hat", num(m.N_hat)},
                      {"se", num(m.se)},
                      {"converged", m.converged},
                      {"error", m.error}});
  return {{"n", c.n},
          {"K", c.K},
          {"f", c.f},
          {"chao", {{"N_hat", num(c.chao.N_hat)}, {"se", num(c.chao.se)}, {"formula", c.chao.formula}}},
          {"m0", c.m0 ? json{{"N_hat", num(c.m0->N_hat)}, {"mu_hat", num(c.m0->mu_hat)}} : json(nullptr)},
          {"models", models}};
}

CompareSection compare_from(const json& j) {
  CompareSection c;
  c.n = j.at("n").get<long long>();
  c.K = j.at("K").get<long long>();
  c.f = j.at("f").get<std::vector<long long>>();
  const auto& ch = j.at("chao");
  c.chao = {get_num(ch, "N_hat"), get_num(ch, "se"), ch.at("formula").get<std::string>()};
  if (!j.at("m0").is_null()) c.m0 = M0Estimate{get_num(j.at("m0"), "N_hat"), get_num(j.at("m0"), "mu_hat")};
  for (const auto& o : j.at("models")) {
    ModelRow m;
    m.model = o.at("model").get<std::string>();
    m.fitted = o.at("fitted").get<bool>();
    m.loglik = get_num(o, "loglik");
    m.parameters = o.at("parameters").get<int>();
    m.aic = get_num(o, "aic");
    m.N_hat = get_num(o, "N_hat");
    m.se = get_num(o, "se");
    m.converged = o.at("converged").get<bool>();
    m.error = o.at("error").get<std::string>();
    c.models.push_back(std::move(m));
  }
  return c;
}

std::string fmt(double v, int precision = 6) {
  if (std::isnan(v)) return "-";
  std::ostringstream o;
  o << std::setprecision(precision) << v;
  return o.str();
}

std::string fmt_window(const BehaviorSpec& w) {
  std::ostringstream o;
  o << "c1=" << w.c1 << " c2=" << (w.c2 == kUnboundedCount ? std::string("inf") : std::to_string(w.c2))
    << " delta_b=" << (std::isinf(w.delta_b) ? std::string("inf") : fmt(w.delta_b));
  return o.str();
}

}  // namespace

json model_to_json(const ModelSpec& spec) {
  json j = window_json(spec.window);
  j["name"] = spec.name();
  j["tau"] = spec.tau;
  j["frailty"] = spec.frailty;
  j["covariates"] = spec.covariates;
  j["time_varying"] = spec.time_varying;
  j["behavior"] = spec.behavior;
  return j;
}

json report_to_json(const Report& r) {
  json params = json::array();
  for (const auto& p : r.parameters)
    params.push_back({{"name", p.name},
                      {"estimate", num(p.estimate)},
                      {"se", num(p.se)},
                      {"z", num(p.z)},
                      {"p_value", num(p.p_value)}});
  json base = json::array();
  for (const auto& b : r.baseline) base.push_back({{"time", b.time}, {"jump", b.jump}, {"cumulative", b.cumulative}});
  return {{"schema", r.schema},
          {"generated_at", r.generated_at},
          {"command", r.command},
          {"model", r.model},
          {"provenance", r.provenance},
          {"converged", r.converged},
          {"iterations", r.iterations},
          {"loglik", r.loglik ? num(*r.loglik) : json(nullptr)},
          {"parameters", params},
          {"population", r.population ? population_json(*r.population) : json(nullptr)},
          {"baseline", base},
          {"grid", r.grid ? grid_json(*r.grid) : json(nullptr)},
          {"compare", r.compare ? compare_json(*r.compare) : json(nullptr)},
          {"warnings", r.warnings}};
}

Report report_from_json(const json& j) {
  try {
    Report r;
    r.schema = j.at("schema").get<int>();
    if (r.schema != 1) throw InputError("unsupported report schema " + std::to_string(r.schema));
    r.generated_at = j.at("generated_at").get<std::string>();
    r.command = j.at("command").get<std::string>();
    r.model = j.at("model");
    r.provenance = j.at("provenance");
    r.converged = j.at("converged").get<bool>();
    r.iterations = j.at("iterations").get<int>();
    if (!j.at("loglik").is_null()) r.loglik = j.at("loglik").get<double>();
    for (const auto& p : j.at("parameters"))
      r.parameters.push_back({p.at("name").get<std::string>(), get_num(p, "estimate"), get_num(p, "se"),
                              get_num(p, "z"), get_num(p, "p_value")});
    if (!j.at("population").is_null()) r.population = population_from(j.at("population"));
    for (const auto& b : j.at("baseline"))
      r.baseline.push_back({b.at("time").get<double>(), b.at("jump").get<double>(), b.at("cumulative").get<double>()});
    if (!j.at("grid").is_null()) r.grid = grid_from(j.at("grid"));
    if (!j.at("compare").is_null()) r.compare = compare_from(j.at("compare"));
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw InputError(std::string("report: ") + e.what());
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream o;
  o << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return o.str();
}

Report fit_report(const FitResult& fit, const LikContext& ctx, const PopEstimate& pop) {
  Report r;
  r.command = "fit";
  r.model = model_to_json(fit.spec);
  r.model["covariate_names"] = ctx.covariate_names;
  r.converged = fit.converged;
  r.iterations = fit.iterations;
  r.loglik = fit.loglik;
  const auto est = fit.estimates();
  const auto se = fit.standard_errors();
  for (std::size_t j = 0; j < est.size(); ++j) {
    ParamRow row{fit.coordinate_names[j], est[j], se[j], kNaN, kNaN};
    if (fit.coordinate_index[j] != 1 && std::isfinite(se[j]) && se[j] > 0.0) {
      const auto t = wald_test(fit, j);
      row.z = t.statistic;
      row.p_value = t.p_value;
    }
    r.parameters.push_back(row);
  }
  if (fit.spec.frailty) r.parameters.push_back({"alpha", fit.params.alpha(), kNaN, kNaN, kNaN});
  r.population = pop;
  double cum = 0.0;
  for (std::size_t k = 0; k < ctx.events(); ++k) {
    cum += fit.params.theta[k];
    r.baseline.push_back({ctx.event_times[k], fit.params.theta[k], cum});
  }
  r.warnings = fit.warnings;
  return r;
}

Report grid_report(const GridResult& grid, const ModelSpec& base) {
  Report r;
  r.command = "grid";
  r.model = model_to_json(base);
  r.grid = grid;
  r.converged = grid.best.has_value();
  for (const auto& row : grid.rows)
    if (row.fitted && !row.converged) r.warnings.push_back("fit did not converge at " + fmt_window(row.window));
  if (grid.best) {
    const auto& b = grid.rows[*grid.best];
    r.loglik = b.loglik;
  } else {
    r.warnings.push_back("no grid cell produced a converged fit");
  }
  return r;
}

Report compare_report(const CountSummary& counts, std::vector<ModelRow> models) {
  Report r;
  r.command = "compare";
  CompareSection c;
  c.n = counts.n();
  c.K = counts.K();
  c.f = counts.f;
  c.chao = chao_lower_bound(counts);
  try {
    c.m0 = m0_closed_form(counts);
  } catch (const Error& e) {
    r.warnings.push_back(std::string("M0: ") + e.what());
  }
  c.models = std::move(models);
  for (const auto& m : c.models) {
    if (!m.error.empty()) r.warnings.push_back(m.model + ": " + m.error);
    else if (m.fitted && !m.converged) r.warnings.push_back(m.model + ": fit did not converge");
    if (m.fitted && !m.converged) r.converged = false;
  }
  r.compare = std::move(c);
  return r;
}

std::string render_text(const Report& r) {
  std::ostringstream o;
  o << "recapture " << r.command << " report (schema " << r.schema << ", " << r.generated_at << ")\n";
  if (!r.model.is_null() && r.model.contains("name")) {
    o << "model: M_" << r.model.at("name").get<std::string>() << "  tau=" << fmt(r.model.at("tau").get<double>());
    if (r.model.at("behavior").get<bool>()) o << "  " << fmt_window(window_from(r.model));
    o << '\n';
  }
  if (r.loglik) o << "log-likelihood: " << fmt(*r.loglik, 10) << '\n';
  if (r.command == "fit") o << "converged: " << (r.converged ? "yes" : "no") << " after " << r.iterations << " iterations\n";

  if (!r.parameters.empty()) {
    o << '\n' << std::left << std::setw(28) << "parameter" << std::right << std::setw(14) << "estimate"
      << std::setw(14) << "se" << std::setw(10) << "z" << std::setw(12) << "p" << '\n';
    for (const auto& p : r.parameters)
      o << std::left << std::setw(28) << p.name << std::right << std::setw(14) << fmt(p.estimate)
        << std::setw(14) << fmt(p.se) << std::setw(10) << fmt(p.z, 4) << std::setw(12) << fmt(p.p_value, 4) << '\n';
  }
  if (r.population) {
    const auto& p = *r.population;
    o << "\nobserved subjects: " << p.n_observed << '\n'
      << "N_hat: " << fmt(p.N_hat, 8) << "  se: " << fmt(p.se) << "  95% CI: [" << fmt(p.ci_low, 8) << ", "
      << fmt(p.ci_high, 8) << "]\n"
      << "variance: binomial " << fmt(p.var_binomial) << " + parameter " << fmt(p.var_param) << '\n';
    if (p.scaled_estimate)
      o << "scaled by catchable fraction " << fmt(*p.catchable_fraction) << ": " << fmt(*p.scaled_estimate, 8) << '\n';
  }
  if (r.grid) {
    o << "\ngrid for M_" << r.grid->model << " (delta = loglik - loglik of first fitted row)\n";
    o << std::setw(5) << "c1" << std::setw(6) << "c2" << std::setw(10) << "delta_b" << std::setw(16) << "loglik"
      << std::setw(12) << "delta" << std::setw(14) << "N_hat" << "  status\n";
    for (std::size_t i = 0; i < r.grid->rows.size(); ++i) {
      const auto& row = r.grid->rows[i];
      o << std::setw(5) << row.window.c1 << std::setw(6)
        << (row.window.c2 == kUnboundedCount ? std::string("inf") : std::to_string(row.window.c2)) << std::setw(10)
        << (std::isinf(row.window.delta_b) ? std::string("inf") : fmt(row.window.delta_b, 4));
      if (row.fitted)
        o << std::setw(16) << fmt(row.loglik, 10) << std::setw(12) << fmt(row.delta_loglik, 5) << std::setw(14)
          << fmt(row.N_hat, 8) << "  " << (row.converged ? "ok" : "not converged");
      else
        o << std::setw(42) << "" << "  " << (row.error.empty() ? row.diagnostic : row.error);
      if (r.grid->best && *r.grid->best == i) o << "  <- best";
      o << '\n';
    }
  }
  if (r.compare) {
    const auto& c = *r.compare;
    o << "\ncounts: n=" << c.n << " K=" << c.K << "  f=(";
    for (std::size_t j = 0; j < c.f.size(); ++j) o << (j ? ", " : "") << c.f[j];
    o << ")\n";
    o << "Chao lower bound: " << fmt(c.chao.N_hat, 8) << "  se " << fmt(c.chao.se) << "  [" << c.chao.formula << "]\n";
    if (c.m0) o << "M0 (zero-truncated Poisson): " << fmt(c.m0->N_hat, 8) << "  mu " << fmt(c.m0->mu_hat) << '\n';
    if (!c.models.empty()) {
      o << '\n' << std::left << std::setw(10) << "model" << std::right << std::setw(16) << "loglik" << std::setw(8)
        << "df" << std::setw(16) << "AIC" << std::setw(14) << "N_hat" << std::setw(12) << "se" << '\n';
      for (const auto& m : c.models) {
        o << std::left << std::setw(10) << ("M_" + m.model) << std::right;
        if (m.fitted)
          o << std::setw(16) << fmt(m.loglik, 10) << std::setw(8) << m.parameters << std::setw(16) << fmt(m.aic, 10)
            << std::setw(14) << fmt(m.N_hat, 8) << std::setw(12) << fmt(m.se) << (m.converged ? "" : "  not converged");
        else
          o << "  " << m.error;
        o << '\n';
      }
    }
  }
  if (!r.baseline.empty()) {
    o << "\nbaseline: " << r.baseline.size() << " jumps, Omega(tau) = " << fmt(r.baseline.back().cumulative) << '\n';
  }
  if (!r.warnings.empty()) {
    o << "\nwarnings:\n";
    for (const auto& w : r.warnings) o << "  - " << w << '\n';
  }
  return o.str();
}

}  // namespace recap
