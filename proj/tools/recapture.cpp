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

// Command-line front end. Talks to the library only through recapture.h.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "recapture/recapture.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNotConverged = 2;

struct DataArgs {
  std::string events, subjects, config;
  double tau = 0.0;
  double truncate_at = 0.0;
};

struct FitArgs {
  std::string model = "hotb";
  std::vector<int> c1, c2;
  std::vector<double> delta_b;
  double catchable_fraction = 0.0;
  int max_iter = 0;
  double tol = 0.0;
};

int status_exit(recap_status s) {
  std::cerr << "error: " << recap_last_error() << '\n';
  switch (s) {
    case RECAP_E_NUMERIC:
    case RECAP_E_STEP:
      return kExitNotConverged;
    default:
      return kExitInput;
  }
}

void add_data_options(CLI::App* cmd, DataArgs& d) {
  cmd->add_option("--events", d.events, "events CSV with columns subject_id,time")->required();
  cmd->add_option("--subjects", d.subjects, "subjects CSV with subject_id and covariate columns");
  cmd->add_option("--config", d.config, "ingest configuration (JSON)");
  cmd->add_option("--tau", d.tau, "length of the observation window (overrides the configuration)");
  cmd->add_option("--truncate-at", d.truncate_at, "keep only captures in (0, t]");
}

void add_fit_options(CLI::App* cmd, FitArgs& f, bool windows) {
  cmd->add_option("--model", f.model, "model name, e.g. hotb, hb, 0")->capture_default_str();
  cmd->add_option("--c1", f.c1, windows ? "onset count(s) for the grid" : "onset of the behavioral response");
  cmd->add_option("--c2", f.c2, "capture count ending the response (0 = unbounded)");
  cmd->add_option("--delta-b", f.delta_b, "memory of the response in time units (0 = unbounded)");
  cmd->add_option("--max-iter", f.max_iter, "EM iteration limit");
  cmd->add_option("--tol", f.tol, "relative log-likelihood convergence tolerance");
}

recap_fit_options make_options(const FitArgs& f, int threads) {
  recap_fit_options o;
  recap_fit_options_init(&o);
  o.model = f.model.c_str();
  o.threads = threads;
  o.max_iter = f.max_iter;
  o.tol = f.tol;
  o.catchable_fraction = f.catchable_fraction;
  if (f.c1.size() > 1 || f.c2.size() > 1 || f.delta_b.size() > 1)
    throw CLI::ValidationError("--c1/--c2/--delta-b take a single value outside grid");
  if (!f.c1.empty()) o.window.c1 = f.c1[0];
  if (!f.c2.empty()) o.window.c2 = f.c2[0];
  if (!f.delta_b.empty()) o.window.delta_b = f.delta_b[0];
  return o;
}

int load(const DataArgs& d, recap_dataset** out) {
  const recap_status s = recap_dataset_load(d.events.c_str(), d.subjects.empty() ? nullptr : d.subjects.c_str(),
                                            d.config.empty() ? nullptr : d.config.c_str(), d.tau,
                                            d.truncate_at, out);
  return s == RECAP_OK ? kExitOk : status_exit(s);
}

int emit(recap_report* report, const std::string& out_dir, bool converged_required) {
  int code = kExitOk;
  if (!out_dir.empty()) {
    const recap_status s = recap_report_write(report, out_dir.c_str());
    if (s != RECAP_OK) code = status_exit(s);
  }
  std::cout << recap_report_text(report);
  if (code == kExitOk && converged_required && !recap_report_converged(report)) code = kExitNotConverged;
  recap_report_free(report);
  return code;
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("RECAPTURE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v <= 1024) return static_cast<int>(v);
    std::cerr << "warning: ignoring RECAPTURE_THREADS='" << env << "'\n";
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time capture-recapture population size estimation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(recap_version()));

  int threads_flag = 0;
  std::string out_dir;
  app.add_option("--threads", threads_flag, "worker threads (default: $RECAPTURE_THREADS or 1)");

  DataArgs data;
  FitArgs fit_args;

  auto* fit_cmd = app.add_subcommand("fit", "fit one model and estimate the population size");
  add_data_options(fit_cmd, data);
  add_fit_options(fit_cmd, fit_args, false);
  fit_cmd->add_option("--catchable-fraction", fit_args.catchable_fraction,
                      "also report N_hat divided by this fraction");
  fit_cmd->add_option("--out", out_dir, "directory for report.json and report.txt");

  DataArgs grid_data;
  FitArgs grid_args;
  auto* grid_cmd = app.add_subcommand("grid", "fit over a grid of behavioral windows");
  add_data_options(grid_cmd, grid_data);
  add_fit_options(grid_cmd, grid_args, true);
  grid_cmd->add_option("--out", out_dir, "directory for report.json and report.txt");

  DataArgs cmp_data;
  FitArgs cmp_args;
  std::string counts;
  std::vector<std::string> cmp_models;
  auto* cmp_cmd = app.add_subcommand("compare", "simple estimators and nested model comparison");
  cmp_cmd->add_option("--counts", counts, "frequency table with columns captures,frequency");
  cmp_cmd->add_option("--events", cmp_data.events, "events CSV with columns subject_id,time");
  cmp_cmd->add_option("--subjects", cmp_data.subjects, "subjects CSV");
  cmp_cmd->add_option("--config", cmp_data.config, "ingest configuration (JSON)");
  cmp_cmd->add_option("--tau", cmp_data.tau, "length of the observation window");
  cmp_cmd->add_option("--truncate-at", cmp_data.truncate_at, "keep only captures in (0, t]");
  cmp_cmd->add_option("--model", cmp_models, "models to fit (repeatable; default: the whole lattice)");
  cmp_cmd->add_option("--c1", cmp_args.c1, "onset of the behavioral response");
  cmp_cmd->add_option("--c2", cmp_args.c2, "capture count ending the response (0 = unbounded)");
  cmp_cmd->add_option("--delta-b", cmp_args.delta_b, "memory of the response (0 = unbounded)");
  cmp_cmd->add_flag("--no-fits", "only the count-based estimators");
  cmp_cmd->add_option("--out", out_dir, "directory for report.json and report.txt");

  std::string sim_config;
  unsigned long long seed = 0;
  auto* sim_cmd = app.add_subcommand("simulate", "simulate capture histories from a JSON configuration");
  sim_cmd->add_option("--config", sim_config, "simulation configuration (JSON)")->required();
  sim_cmd->add_option("--seed", seed, "override the configured seed");
  sim_cmd->add_option("--out", out_dir, "directory for the data files and reports")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }
  const int threads = resolve_threads(threads_flag);

  try {
    if (*fit_cmd) {
      const auto opts = make_options(fit_args, threads);
      recap_dataset* ds = nullptr;
      if (const int rc = load(data, &ds); rc != kExitOk) return rc;
      recap_report* report = nullptr;
      const recap_status s = recap_fit(ds, &opts, &report);
      recap_dataset_free(ds);
      if (s != RECAP_OK) return status_exit(s);
      return emit(report, out_dir, true);
    }

    if (*grid_cmd) {
      FitArgs single = grid_args;
      single.c1.clear();
      single.c2.clear();
      single.delta_b.clear();
      const auto opts = make_options(single, threads);
      recap_dataset* ds = nullptr;
      if (const int rc = load(grid_data, &ds); rc != kExitOk) return rc;
      recap_report* report = nullptr;
      const recap_status s = recap_grid(ds, &opts, grid_args.c1.data(), grid_args.c1.size(), grid_args.c2.data(),
                                        grid_args.c2.size(), grid_args.delta_b.data(), grid_args.delta_b.size(),
                                        &report);
      recap_dataset_free(ds);
      if (s != RECAP_OK) return status_exit(s);
      return emit(report, out_dir, true);
    }

    if (*cmp_cmd) {
      recap_report* report = nullptr;
      if (!counts.empty()) {
        if (!cmp_data.events.empty()) throw CLI::ValidationError("give either --counts or --events, not both");
        const recap_status s = recap_compare_counts(counts.c_str(), &report);
        if (s != RECAP_OK) return status_exit(s);
        return emit(report, out_dir, false);
      }
      if (cmp_data.events.empty()) throw CLI::ValidationError("compare needs --counts or --events");
      const auto opts = make_options(cmp_args, threads);
      recap_dataset* ds = nullptr;
      if (const int rc = load(cmp_data, &ds); rc != kExitOk) return rc;
      std::vector<const char*> names;
      for (const auto& m : cmp_models) names.push_back(m.c_str());
      const bool no_fits = cmp_cmd->count("--no-fits") > 0;
      static const char* const none[] = {nullptr};
      const char* const* list = no_fits ? none : (names.empty() ? nullptr : names.data());
      const recap_status s = recap_compare_dataset(ds, &opts, list, no_fits ? 0 : names.size(), &report);
      recap_dataset_free(ds);
      if (s != RECAP_OK) return status_exit(s);
      return emit(report, out_dir, true);
    }

    if (*sim_cmd) {
      std::ifstream in(sim_config);
      if (!in) {
        std::cerr << "error: cannot open '" << sim_config << "'\n";
        return kExitInput;
      }
      std::stringstream text;
      text << in.rdbuf();
      recap_report* report = nullptr;
      const recap_status s = recap_simulate(text.str().c_str(), seed, threads, out_dir.c_str(), &report);
      if (s != RECAP_OK) return status_exit(s);
      return emit(report, out_dir, false);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
