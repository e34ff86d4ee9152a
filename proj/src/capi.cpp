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

#include "recapture/recapture.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <string>

#include "recapture/em.hpp"
#include "recapture/error.hpp"
#include "recapture/io.hpp"
#include "recapture/population.hpp"
#include "recapture/selection.hpp"
#include "recapture/simulator.hpp"

struct recap_dataset {
  recap::Dataset data;
  std::vector<std::string> warnings;
};

struct recap_report {
  recap::Report report;
  std::string json;
  std::string text;
};

namespace {

thread_local std::string last_error;

recap_status fail(recap_status status, const std::string& what) {
  last_error = what;
  return status;
}

template <class F>
recap_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return RECAP_OK;
  } catch (const recap::Error& e) {
    return fail(static_cast<recap_status>(e.kind()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(RECAP_E_INPUT, e.what());
  } catch (const std::exception& e) {
    return fail(RECAP_E_INTERNAL, e.what());
  } catch (...) {
    return fail(RECAP_E_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (!p) throw recap::InputError(std::string(what) + " must not be NULL");
}

recap::BehaviorSpec to_window(const recap_window& w) {
  recap::BehaviorSpec out;
  out.c1 = w.c1;
  out.c2 = w.c2 <= 0 ? recap::kUnboundedCount : w.c2;
  out.delta_b = (w.delta_b <= 0.0 || std::isinf(w.delta_b)) ? recap::kUnboundedTime : w.delta_b;
  out.validate();
  return out;
}

recap::EmConfig to_config(const recap_fit_options& o) {
  recap::EmConfig cfg;
  cfg.threads = o.threads;
  if (o.max_iter > 0) cfg.max_iter = o.max_iter;
  if (o.tol > 0.0) cfg.loglik_rel_tol = o.tol;
  cfg.validate();
  return cfg;
}

recap_report* finish(recap::Report r, const recap_dataset* data) {
  if (data) {
    r.warnings.insert(r.warnings.begin(), data->warnings.begin(), data->warnings.end());
    if (!data->data.provenance.empty()) r.provenance = nlohmann::json::parse(data->data.provenance);
  }
  r.generated_at = recap::utc_timestamp();
  auto out = std::make_unique<recap_report>();
  out->json = recap::report_to_json(r).dump(2) + "\n";
  out->text = recap::render_text(r);
  out->report = std::move(r);
  return out.release();
}

// Population estimate that degrades to a point estimate when the variance
// cannot be formed.
recap::PopEstimate population_or_point(const recap::FitResult& fit, const recap::LikContext& ctx,
                                       std::optional<double> fraction, int threads,
                                       std::vector<std::string>& warnings) {
  try {
    return recap::estimate_population(fit, ctx, fraction, threads);
  } catch (const recap::NumericError& e) {
    warnings.push_back(std::string("variance of N_hat unavailable: ") + e.what());
    recap::PopEstimate p;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    p.n_observed = ctx.n;
    const auto rho = recap::e_step(fit.params, ctx, threads);
    p.N_hat = recap::ht_estimate(rho, ctx.gammas(fit.params.beta), fit.params.omega_tau());
    p.var_binomial = p.var_param = p.se = p.ci_low = p.ci_high = nan;
    if (fraction) {
      p.catchable_fraction = fraction;
      p.scaled_estimate = recap::scaled_indirect_estimate(p.N_hat, *fraction);
    }
    return p;
  }
}

std::optional<double> fraction_of(const recap_fit_options& o) {
  if (o.catchable_fraction == 0.0) return std::nullopt;
  recap::scaled_indirect_estimate(1.0, o.catchable_fraction);  // validates
  return o.catchable_fraction;
}

}  // namespace

extern "C" {

const char* recap_version(void) { return "1.0.0"; }

const char* recap_last_error(void) { return last_error.c_str(); }

void recap_fit_options_init(recap_fit_options* opts) {
  if (!opts) return;
  opts->model = "hotb";
  opts->window = recap_window{1, 0, 0.0};
  opts->threads = 1;
  opts->max_iter = 0;
  opts->tol = 0.0;
  opts->catchable_fraction = 0.0;
}

recap_status recap_dataset_load(const char* events_path, const char* subjects_path,
                                const char* config_path, double tau, double truncate_at,
                                recap_dataset** out) {
  return guarded([&] {
    require(events_path, "events_path");
    require(out, "out");
    *out = nullptr;
    recap::IngestConfig cfg;
    if (config_path) cfg = recap::IngestConfig::load(config_path);
    else if (!(tau > 0.0)) throw recap::InputError("either an ingest configuration or tau > 0 is required");
    if (tau > 0.0) cfg.tau = tau;
    if (truncate_at > 0.0) cfg.truncate_at = truncate_at;
    else if (truncate_at < 0.0) throw recap::InputError("truncation time must be positive");
    auto res = recap::ingest(events_path, subjects_path ? subjects_path : "", cfg);
    *out = new recap_dataset{std::move(res.data), std::move(res.warnings)};
  });
}

recap_status recap_dataset_truncate(const recap_dataset* data, double t, recap_dataset** out) {
  return guarded([&] {
    require(data, "data");
    require(out, "out");
    *out = nullptr;
    *out = new recap_dataset{recap::truncate(data->data, t), data->warnings};
  });
}

size_t recap_dataset_size(const recap_dataset* data) { return data ? data->data.size() : 0; }

size_t recap_dataset_captures(const recap_dataset* data) {
  return data ? data->data.total_captures() : 0;
}

void recap_dataset_free(recap_dataset* data) { delete data; }

recap_status recap_fit(const recap_dataset* data, const recap_fit_options* opts, recap_report** out) {
  return guarded([&] {
    require(data, "data");
    require(opts, "opts");
    require(out, "out");
    require(opts->model, "opts->model");
    *out = nullptr;
    const auto cfg = to_config(*opts);
    const auto fraction = fraction_of(*opts);
    const auto spec = recap::ModelSpec::from_name(opts->model, data->data.tau, to_window(opts->window));
    const auto ctx = recap::LikContext::build(data->data, spec);
    const auto fit = recap::fit(ctx, cfg);
    std::vector<std::string> extra;
    const auto pop = population_or_point(fit, ctx, fraction, cfg.threads, extra);
    auto report = recap::fit_report(fit, ctx, pop);
    report.warnings.insert(report.warnings.end(), extra.begin(), extra.end());
    *out = finish(std::move(report), data);
  });
}

recap_status recap_grid(const recap_dataset* data, const recap_fit_options* opts, const int* c1,
                        size_t n_c1, const int* c2, size_t n_c2, const double* delta_b,
                        size_t n_delta, recap_report** out) {
  return guarded([&] {
    require(data, "data");
    require(opts, "opts");
    require(out, "out");
    require(opts->model, "opts->model");
    *out = nullptr;
    if ((n_c1 && !c1) || (n_c2 && !c2) || (n_delta && !delta_b))
      throw recap::InputError("grid arrays must not be NULL");
    const auto cfg = to_config(*opts);
    const auto spec = recap::ModelSpec::from_name(opts->model, data->data.tau, {});
    if (!spec.behavior) throw recap::InputError("grid search needs a model with a behavioral effect");
    std::vector<int> c1s(c1, c1 + n_c1), c2s;
    std::vector<double> dbs;
    for (size_t i = 0; i < n_c2; ++i) c2s.push_back(c2[i] <= 0 ? recap::kUnboundedCount : c2[i]);
    for (size_t i = 0; i < n_delta; ++i)
      dbs.push_back(delta_b[i] <= 0.0 || std::isinf(delta_b[i]) ? recap::kUnboundedTime : delta_b[i]);
    if (c1s.empty()) c1s.push_back(1);
    if (c2s.empty()) c2s.push_back(recap::kUnboundedCount);
    if (dbs.empty()) dbs.push_back(recap::kUnboundedTime);
    const auto grid = recap::grid_search(data->data, spec, c1s, c2s, dbs, cfg);
    *out = finish(recap::grid_report(grid, spec), data);
  });
}

recap_status recap_compare_dataset(const recap_dataset* data, const recap_fit_options* opts,
                                   const char* const* models, size_t n_models, recap_report** out) {
  return guarded([&] {
    require(data, "data");
    require(opts, "opts");
    require(out, "out");
    *out = nullptr;
    const auto cfg = to_config(*opts);
    const auto window = to_window(opts->window);
    std::vector<std::string> names;
    if (models) {
      for (size_t i = 0; i < n_models; ++i) {
        require(models[i], "model name");
        names.emplace_back(models[i]);
      }
    } else {
      names = recap::ModelSpec::lattice_names();
    }
    std::vector<recap::ModelRow> rows;
    for (const auto& name : names) {
      recap::ModelRow row;
      const auto spec = recap::ModelSpec::from_name(name, data->data.tau, window);
      row.model = spec.name();
      try {
        const auto ctx = recap::LikContext::build(data->data, spec);
        const auto fit = recap::fit(ctx, cfg);
        row.fitted = true;
        row.loglik = fit.loglik;
        row.converged = fit.converged;
        row.parameters = recap::parameter_count(fit, ctx.events());
        row.aic = 2.0 * row.parameters - 2.0 * row.loglik;
        std::vector<std::string> ignored;
        const auto pop = population_or_point(fit, ctx, std::nullopt, cfg.threads, ignored);
        row.N_hat = pop.N_hat;
        row.se = pop.se;
      } catch (const recap::Error& e) {
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
    *out = finish(recap::compare_report(recap::CountSummary::from_dataset(data->data), std::move(rows)), data);
  });
}

recap_status recap_compare_counts(const char* counts_path, recap_report** out) {
  return guarded([&] {
    require(counts_path, "counts_path");
    require(out, "out");
    *out = nullptr;
    *out = finish(recap::compare_report(recap::read_counts(counts_path), {}), nullptr);
  });
}

recap_status recap_simulate(const char* config_json, unsigned long long seed_override, int threads,
                            const char* out_dir, recap_report** out) {
  return guarded([&] {
    require(config_json, "config_json");
    require(out_dir, "out_dir");
    require(out, "out");
    *out = nullptr;
    if (threads < 1) throw recap::InputError("threads must be >= 1");
    auto cfg = recap::sim_config_from_json(nlohmann::json::parse(config_json));
    if (seed_override != 0) cfg.seed = seed_override;
    const auto sim = recap::simulate(cfg, threads);
    if (sim.observed_count() == 0) throw recap::InputError("simulation produced no captured subjects");

    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
      std::ofstream f(dir / name);
      if (!f) throw recap::InputError("cannot write '" + (dir / name).string() + "'");
      return f;
    };
    {
      auto f = open("events.csv");
      recap::write_simulation_events(f, sim);
    }
    {
      auto f = open("subjects.csv");
      recap::write_simulation_subjects(f, sim);
    }
    const auto ingest_cfg = recap::simulation_ingest_config(sim);
    {
      auto f = open("config.json");
      f << ingest_cfg.to_json().dump(2) << '\n';
    }
    auto report = recap::compare_report(recap::CountSummary::from_dataset(sim.observed()), {});
    report.command = "simulate";
    report.provenance = ingest_cfg.provenance;
    *out = finish(std::move(report), nullptr);
  });
}

const char* recap_report_json(const recap_report* report) { return report ? report->json.c_str() : ""; }

const char* recap_report_text(const recap_report* report) { return report ? report->text.c_str() : ""; }

int recap_report_converged(const recap_report* report) {
  return report && report->report.converged ? 1 : 0;
}

double recap_report_loglik(const recap_report* report) {
  if (!report || !report->report.loglik) return std::numeric_limits<double>::quiet_NaN();
  return *report->report.loglik;
}

recap_status recap_report_write(const recap_report* report, const char* dir) {
  return guarded([&] {
    require(report, "report");
    require(dir, "dir");
    const std::filesystem::path d(dir);
    std::filesystem::create_directories(d);
    std::ofstream j(d / "report.json");
    std::ofstream t(d / "report.txt");
    if (!j || !t) throw recap::InputError("cannot write reports into '" + d.string() + "'");
    j << report->json;
    t << report->text;
    if (!j || !t) throw recap::InputError("failed writing reports into '" + d.string() + "'");
  });
}

void recap_report_free(recap_report* report) { delete report; }

}  // extern "C"
