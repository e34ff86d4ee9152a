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

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "recapture/em.hpp"
#include "recapture/model.hpp"
#include "recapture/population.hpp"
#include "recapture/selection.hpp"
#include "recapture/simulator.hpp"

namespace recap {

// ---------------------------------------------------------------- ingest

struct CovariateSpec {
  enum class Kind { Numeric, Categorical };
  std::string column;
  Kind kind = Kind::Numeric;
  // numeric
  std::optional<double> center;  // subtract this value
  bool center_mean = false;      // subtract the sample mean over analysed subjects
  bool square = false;           // add a column^2 term after centering
  // categorical
  std::string reference;
  std::vector<std::string> levels;  // optional fixed order; default: sorted observed levels
};

struct IngestConfig {
  enum class TimeFormat { Days, Datetime };
  double tau = 0.0;
  TimeFormat time_format = TimeFormat::Days;
  std::string time_origin;  // "YYYY-MM-DD[ HH:MM[:SS]]", required for datetime
  std::vector<CovariateSpec> covariates;
  std::optional<double> truncate_at;  // keep captures in (0, t] only; tau becomes t
  nlohmann::json provenance;          // copied into reports

  static IngestConfig from_json(const nlohmann::json& j);
  static IngestConfig load(const std::string& path);
  nlohmann::json to_json() const;
};

struct IngestResult {
  Dataset data;
  std::vector<std::string> warnings;
};

/// Reads `subject_id,time` events and, if configured covariates exist, a
/// `subject_id,...` subjects table. Line numbers in errors are 1-based and
/// include the header.
IngestResult ingest(std::istream& events, std::istream* subjects, const IngestConfig& cfg);
IngestResult ingest(const std::string& events_path, const std::string& subjects_path,
                    const IngestConfig& cfg);

/// Fractional days since time_origin for "YYYY-MM-DD[ HH:MM[:SS]]" (a 'T'
/// separator is accepted too).
double parse_datetime_days(const std::string& text, const std::string& origin);

/// Drops captures after t and subjects left without captures; the window
/// becomes (0, t]. Throws InputError when nothing is left.
Dataset truncate(const Dataset& data, double t);

/// `captures,frequency` rows.
CountSummary parse_counts(std::istream& in);
CountSummary read_counts(const std::string& path);

/// Event and subject tables for a simulated population, readable by ingest
/// with the returned configuration.
void write_simulation_events(std::ostream& out, const Simulation& sim);
void write_simulation_subjects(std::ostream& out, const Simulation& sim);
IngestConfig simulation_ingest_config(const Simulation& sim);
nlohmann::json sim_config_to_json(const SimConfig& cfg);
SimConfig sim_config_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------- reports

struct ParamRow {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;  // NaN when not available
  double z = 0.0;   // NaN when no test applies
  double p_value = 0.0;
};

struct BaselineRow {
  double time = 0.0;
  double jump = 0.0;
  double cumulative = 0.0;
};

struct ModelRow {
  std::string model;
  bool fitted = false;
  double loglik = 0.0;
  int parameters = 0;
  double aic = 0.0;
  double N_hat = 0.0;
  double se = 0.0;
  bool converged = false;
  std::string error;
};

struct CompareSection {
  long long n = 0;
  long long K = 0;
  std::vector<long long> f;
  ChaoEstimate chao;
  std::optional<M0Estimate> m0;
  std::vector<ModelRow> models;
};

struct Report {
  int schema = 1;
  std::string generated_at;
  std::string command;
  nlohmann::json model;  // spec echo
  nlohmann::json provenance;
  bool converged = true;
  int iterations = 0;
  std::optional<double> loglik;
  std::vector<ParamRow> parameters;
  std::optional<PopEstimate> population;
  std::vector<BaselineRow> baseline;
  std::optional<GridResult> grid;
  std::optional<CompareSection> compare;
  std::vector<std::string> warnings;
};

nlohmann::json model_to_json(const ModelSpec& spec);
nlohmann::json report_to_json(const Report& r);
Report report_from_json(const nlohmann::json& j);
std::string render_text(const Report& r);

/// Current UTC time as an ISO 8601 string.
std::string utc_timestamp();

Report fit_report(const FitResult& fit, const LikContext& ctx, const PopEstimate& pop);
Report grid_report(const GridResult& grid, const ModelSpec& base);
Report compare_report(const CountSummary& counts, std::vector<ModelRow> models);

}  // namespace recap
