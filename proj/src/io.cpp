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

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "recapture/error.hpp"
#include "recapture/io.hpp"

namespace recap {
namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void fail_at(const std::string& source, std::size_t line, const std::string& what) {
  throw InputError(source + " line " + std::to_string(line) + ": " + what);
}

// One CSV record; double quotes group commas and "" escapes a quote.
std::vector<std::string> split_csv(const std::string& line, const std::string& source,
                                   std::size_t lineno) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      if (!trim(cell).empty()) fail_at(source, lineno, "stray quote");
      cell.clear();
      quoted = was_quoted = true;
    } else if (c == ',') {
      out.push_back(was_quoted ? cell : trim(cell));
      cell.clear();
      was_quoted = false;
    } else {
      cell += c;
    }
  }
  if (quoted) fail_at(source, lineno, "unterminated quote");
  out.push_back(was_quoted ? cell : trim(cell));
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;

  std::size_t column(const std::string& name, const std::string& source) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InputError(source + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

Table read_table(std::istream& in, const std::string& source) {
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_csv(line, source, lineno);
    if (t.header.empty()) {
      t.header = std::move(cells);
      if (!t.header.empty() && t.header[0].rfind("\xEF\xBB\xBF", 0) == 0) t.header[0].erase(0, 3);
      std::set<std::string> seen;
      for (const auto& h : t.header)
        if (!seen.insert(h).second) fail_at(source, lineno, "duplicate column '" + h + "'");
      continue;
    }
    if (cells.size() != t.header.size())
      fail_at(source, lineno, "expected " + std::to_string(t.header.size()) + " fields, found " +
                                  std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
    t.lines.push_back(lineno);
  }
  if (t.header.empty()) throw InputError(source + ": empty file");
  return t;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = b + s.size();
  if (*b == '+') ++b;
  const auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e && std::isfinite(out);
}

bool parse_int(const std::string& s, long long& out) {
  if (s.empty()) return false;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

std::string format_double(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return in;
}

json optional_number(double v) {
  return std::isfinite(v) ? json(v) : json(nullptr);
}

double number_or(const json& j, const char* key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<double>();
}

}  // namespace

// ---------------------------------------------------------------- config

IngestConfig IngestConfig::from_json(const json& j) {
  try {
    IngestConfig cfg;
    cfg.tau = j.at("tau").get<double>();
    if (!(cfg.tau > 0.0) || !std::isfinite(cfg.tau)) throw InputError("config: tau must be positive");
    const std::string fmt = j.value("time_format", "days");
    if (fmt == "days") cfg.time_format = TimeFormat::Days;
    else if (fmt == "datetime") cfg.time_format = TimeFormat::Datetime;
    else throw InputError("config: time_format must be 'days' or 'datetime'");
    cfg.time_origin = j.value("time_origin", "");
    if (cfg.time_format == TimeFormat::Datetime) {
      if (cfg.time_origin.empty()) throw InputError("config: datetime input needs time_origin");
      parse_datetime_days(cfg.time_origin, cfg.time_origin);
    }
    if (j.contains("truncate_at") && !j.at("truncate_at").is_null())
      cfg.truncate_at = j.at("truncate_at").get<double>();
    for (const auto& c : j.value("covariates", json::array())) {
      CovariateSpec spec;
      spec.column = c.at("column").get<std::string>();
      const std::string kind = c.value("type", "numeric");
      if (kind == "numeric") {
        spec.kind = CovariateSpec::Kind::Numeric;
        if (c.contains("center")) {
          const auto& ce = c.at("center");
          if (ce.is_string()) {
            if (ce.get<std::string>() != "mean")
              throw InputError("config: center must be a number or \"mean\"");
            spec.center_mean = true;
          } else if (!ce.is_null()) {
            spec.center = ce.get<double>();
          }
        }
        spec.square = c.value("square", false);
      } else if (kind == "categorical") {
        spec.kind = CovariateSpec::Kind::Categorical;
        spec.reference = c.at("reference").get<std::string>();
        spec.levels = c.value("levels", std::vector<std::string>{});
      } else {
        throw InputError("config: covariate type must be 'numeric' or 'categorical'");
      }
      cfg.covariates.push_back(std::move(spec));
    }
    if (j.contains("provenance")) cfg.provenance = j.at("provenance");
    return cfg;
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
}

IngestConfig IngestConfig::load(const std::string& path) {
  auto in = open_input(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("'" + path + "': " + e.what());
  }
  return from_json(j);
}

json IngestConfig::to_json() const {
  json j;
  j["tau"] = tau;
  j["time_format"] = time_format == TimeFormat::Days ? "days" : "datetime";
  if (!time_origin.empty()) j["time_origin"] = time_origin;
  if (truncate_at) j["truncate_at"] = *truncate_at;
  json covs = json::array();
  for (const auto& c : covariates) {
    json o{{"column", c.column}};
    if (c.kind == CovariateSpec::Kind::Numeric) {
      o["type"] = "numeric";
      if (c.center_mean) o["center"] = "mean";
      else if (c.center) o["center"] = *c.center;
      if (c.square) o["square"] = true;
    } else {
      o["type"] = "categorical";
      o["reference"] = c.reference;
      if (!c.levels.empty()) o["levels"] = c.levels;
    }
    covs.push_back(o);
  }
  j["covariates"] = covs;
  if (!provenance.is_null()) j["provenance"] = provenance;
  return j;
}

// ---------------------------------------------------------------- ingest

double parse_datetime_days(const std::string& text, const std::string& origin) {
  auto parse = [](const std::string& s) -> double {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    double sec = 0.0;
    char sep = 0;
    const std::string t = trim(s);
    int consumed = 0;
    if (std::sscanf(t.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &consumed) != 3 || consumed != 10)
      throw InputError("bad date '" + s + "' (expected YYYY-MM-DD[ HH:MM[:SS]])");
    if (t.size() > 10) {
      sep = t[10];
      if (sep != ' ' && sep != 'T') throw InputError("bad date-time separator in '" + s + "'");
      int used = 0;
      const std::string rest = t.substr(11);
      if (std::sscanf(rest.c_str(), "%2d:%2d%n", &h, &mi, &used) != 2)
        throw InputError("bad time of day in '" + s + "'");
      if (static_cast<std::size_t>(used) < rest.size()) {
        if (rest[static_cast<std::size_t>(used)] != ':') throw InputError("bad time of day in '" + s + "'");
        if (!parse_double(rest.substr(static_cast<std::size_t>(used) + 1), sec) || sec < 0.0 || sec >= 61.0)
          throw InputError("bad seconds in '" + s + "'");
      }
      if (h < 0 || h > 23 || mi < 0 || mi > 59) throw InputError("bad time of day in '" + s + "'");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw InputError("invalid calendar date '" + s + "'");
    const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
    return static_cast<double>(days) + (h * 3600.0 + mi * 60.0 + sec) / 86400.0;
  };
  return parse(text) - parse(origin);
}

IngestResult ingest(std::istream& events, std::istream* subjects, const IngestConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw InputError("config: tau must be positive");
  double window = cfg.tau;
  if (cfg.truncate_at) {
    if (!(*cfg.truncate_at > 0.0) || *cfg.truncate_at > cfg.tau)
      throw InputError("truncation time must lie in (0, tau]");
    window = *cfg.truncate_at;
  }
  IngestResult out;
  const Table ev = read_table(events, "events");
  const std::size_t sid_col = ev.column("subject_id", "events");
  const std::size_t time_col = ev.column("time", "events");

  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<double>> times;
  std::map<std::pair<std::string, double>, std::size_t> seen;
  for (std::size_t r = 0; r < ev.rows.size(); ++r) {
    const auto& row = ev.rows[r];
    const std::string& id = row[sid_col];
    if (id.empty()) fail_at("events", ev.lines[r], "empty subject_id");
    double t = 0.0;
    if (cfg.time_format == IngestConfig::TimeFormat::Days) {
      if (!parse_double(row[time_col], t)) fail_at("events", ev.lines[r], "bad time '" + row[time_col] + "'");
    } else {
      try {
        t = parse_datetime_days(row[time_col], cfg.time_origin);
      } catch (const InputError& e) {
        fail_at("events", ev.lines[r], e.what());
      }
    }
    if (!(t > 0.0) || t > cfg.tau) {
      std::ostringstream msg;
      msg << "time " << row[time_col] << " outside (0, " << cfg.tau << "]";
      fail_at("events", ev.lines[r], msg.str());
    }
    const auto [it, fresh] = seen.emplace(std::make_pair(id, t), ev.lines[r]);
    if (!fresh)
      fail_at("events", ev.lines[r],
              "duplicate capture of '" + id + "' (first on line " + std::to_string(it->second) + ")");
    if (t > window) continue;
    auto& v = times[id];
    if (v.empty()) order.push_back(id);
    v.push_back(t);
  }
  if (order.empty())
    throw InputError(cfg.truncate_at ? "no captures on (0, truncate_at]" : "events: no captures");

  Dataset& data = out.data;
  data.tau = window;
  data.subjects.reserve(order.size());
  for (const auto& id : order) {
    auto v = std::move(times[id]);
    std::sort(v.begin(), v.end());
    data.subjects.push_back(CaptureHistory{id, std::move(v), {}});
  }

  if (!cfg.covariates.empty()) {
    if (!subjects) throw InputError("covariates configured but no subjects table given");
    const Table sub = read_table(*subjects, "subjects");
    const std::size_t sc = sub.column("subject_id", "subjects");
    std::vector<std::size_t> cols;
    for (const auto& c : cfg.covariates) cols.push_back(sub.column(c.column, "subjects"));
    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t r = 0; r < sub.rows.size(); ++r) {
      const auto [it, fresh] = row_of.emplace(sub.rows[r][sc], r);
      if (!fresh) fail_at("subjects", sub.lines[r], "duplicate subject '" + sub.rows[r][sc] + "'");
    }
    std::vector<std::string> missing;
    for (const auto& h : data.subjects)
      if (!row_of.count(h.subject_id)) missing.push_back(h.subject_id);
    if (!missing.empty()) {
      std::string list;
      for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
      if (missing.size() > 20) list += ", ...";
      throw InputError(std::to_string(missing.size()) + " captured subject(s) missing from the subjects table: " + list);
    }
    std::size_t unused = 0;
    for (const auto& [id, r] : row_of)
      if (!times.count(id)) ++unused;
    if (unused)
      out.warnings.push_back(std::to_string(unused) +
                             " subject(s) in the subjects table have no captures and were ignored");

    for (std::size_t c = 0; c < cfg.covariates.size(); ++c) {
      const auto& spec = cfg.covariates[c];
      std::vector<std::string> cells;
      std::vector<std::size_t> lines;
      for (const auto& h : data.subjects) {
        const std::size_t r = row_of.at(h.subject_id);
        cells.push_back(sub.rows[r][cols[c]]);
        lines.push_back(sub.lines[r]);
        if (cells.back().empty())
          fail_at("subjects", lines.back(), "missing value for '" + spec.column + "'");
      }
      if (spec.kind == CovariateSpec::Kind::Numeric) {
        std::vector<double> v(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i)
          if (!parse_double(cells[i], v[i]))
            fail_at("subjects", lines[i], "bad numeric value '" + cells[i] + "' for '" + spec.column + "'");
        double shift = spec.center.value_or(0.0);
        if (spec.center_mean) shift = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        data.covariate_names.push_back(spec.column);
        if (spec.square) data.covariate_names.push_back(spec.column + "^2");
        for (std::size_t i = 0; i < v.size(); ++i) {
          const double x = v[i] - shift;
          data.subjects[i].covariates.push_back(x);
          if (spec.square) data.subjects[i].covariates.push_back(x * x);
        }
      } else {
        std::vector<std::string> levels = spec.levels;
        if (levels.empty()) {
          std::set<std::string> s(cells.begin(), cells.end());
          s.insert(spec.reference);
          levels.assign(s.begin(), s.end());
        }
        if (std::find(levels.begin(), levels.end(), spec.reference) == levels.end())
          throw InputError("covariate '" + spec.column + "': reference level '" + spec.reference +
                           "' is not among its levels");
        for (std::size_t i = 0; i < cells.size(); ++i)
          if (std::find(levels.begin(), levels.end(), cells[i]) == levels.end())
            fail_at("subjects", lines[i], "unknown level '" + cells[i] + "' for '" + spec.column + "'");
        for (const auto& level : levels) {
          if (level == spec.reference) continue;
          data.covariate_names.push_back(spec.column + ":" + level);
          for (std::size_t i = 0; i < cells.size(); ++i)
            data.subjects[i].covariates.push_back(cells[i] == level ? 1.0 : 0.0);
        }
      }
    }
  }
  if (!cfg.provenance.is_null()) data.provenance = cfg.provenance.dump();
  validate_dataset(data);
  return out;
}

IngestResult ingest(const std::string& events_path, const std::string& subjects_path,
                    const IngestConfig& cfg) {
  auto ev = open_input(events_path);
  if (subjects_path.empty()) return ingest(ev, nullptr, cfg);
  auto sub = open_input(subjects_path);
  return ingest(ev, &sub, cfg);
}

Dataset truncate(const Dataset& data, double t) {
  if (!(t > 0.0) || t > data.tau) throw InputError("truncation time must lie in (0, tau]");
  Dataset out;
  out.tau = t;
  out.covariate_names = data.covariate_names;
  out.provenance = data.provenance;
  for (const auto& h : data.subjects) {
    CaptureHistory kept{h.subject_id, {}, h.covariates};
    for (double x : h.times)
      if (x <= t) kept.times.push_back(x);
    if (!kept.times.empty()) out.subjects.push_back(std::move(kept));
  }
  if (out.subjects.empty()) throw InputError("no captures on (0, truncate_at]");
  return out;
}

CountSummary parse_counts(std::istream& in) {
  const Table t = read_table(in, "counts");
  const std::size_t jc = t.column("captures", "counts");
  const std::size_t fc = t.column("frequency", "counts");
  std::map<long long, long long> f;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    long long j = 0, n = 0;
    if (!parse_int(t.rows[r][jc], j) || j < 1) fail_at("counts", t.lines[r], "captures must be an integer >= 1");
    if (!parse_int(t.rows[r][fc], n) || n < 0) fail_at("counts", t.lines[r], "frequency must be an integer >= 0");
    if (!f.emplace(j, n).second) fail_at("counts", t.lines[r], "duplicate row for " + std::to_string(j) + " captures");
  }
  if (f.empty()) throw InputError("counts: no rows");
  if (f.rbegin()->first > 100000) throw InputError("counts: capture count too large");
  CountSummary out;
  out.f.assign(static_cast<std::size_t>(f.rbegin()->first), 0);
  for (const auto& [j, n] : f) out.f[static_cast<std::size_t>(j - 1)] = n;
  if (out.n() == 0) throw InputError("counts: no observed subjects");
  return out;
}

CountSummary read_counts(const std::string& path) {
  auto in = open_input(path);
  return parse_counts(in);
}

// ---------------------------------------------------------------- simulation files

void write_simulation_events(std::ostream& out, const Simulation& sim) {
  out << "subject_id,time\n";
  for (const auto& s : sim.population)
    for (double t : s.times) out << s.subject_id << ',' << format_double(t) << '\n';
}

void write_simulation_subjects(std::ostream& out, const Simulation& sim) {
  out << "subject_id";
  for (const auto& g : sim.config.covariates) out << ',' << g.name;
  out << '\n';
  for (const auto& s : sim.population) {
    if (s.times.empty()) continue;
    out << s.subject_id;
    for (const auto& cell : s.raw_covariates) out << ',' << cell;
    out << '\n';
  }
}

IngestConfig simulation_ingest_config(const Simulation& sim) {
  IngestConfig cfg;
  cfg.tau = sim.config.tau;
  for (const auto& g : sim.config.covariates) {
    CovariateSpec c;
    c.column = g.name;
    if (g.kind == CovariateGenerator::Kind::Categorical) {
      c.kind = CovariateSpec::Kind::Categorical;
      c.reference = g.levels.front();
      c.levels = g.levels;
    }
    cfg.covariates.push_back(std::move(c));
  }
  cfg.provenance = json{{"simulation", sim_config_to_json(sim.config)}};
  return cfg;
}

json sim_config_to_json(const SimConfig& cfg) {
  json j;
  j["N_true"] = cfg.N_true;
  j["tau"] = cfg.tau;
  j["alpha"] = cfg.alpha ? json(*cfg.alpha) : json(nullptr);
  j["phi"] = cfg.phi;
  j["c1"] = cfg.window.c1;
  j["c2"] = cfg.window.c2 == kUnboundedCount ? json(nullptr) : json(cfg.window.c2);
  j["delta_b"] = optional_number(cfg.window.delta_b);
  j["seed"] = cfg.seed;
  json b;
  switch (cfg.baseline.kind) {
    case BaselineShape::Kind::Constant:
      b = {{"kind", "constant"}, {"level", cfg.baseline.level}};
      break;
    case BaselineShape::Kind::PiecewiseConstant:
      b = {{"kind", "piecewise"}, {"breakpoints", cfg.baseline.breakpoints}, {"levels", cfg.baseline.levels}};
      break;
    case BaselineShape::Kind::Sinusoidal:
      b = {{"kind", "sinusoidal"},
           {"level", cfg.baseline.level},
           {"amplitude", cfg.baseline.amplitude},
           {"periods", cfg.baseline.periods}};
      break;
  }
  j["baseline"] = b;
  json covs = json::array();
  for (const auto& g : cfg.covariates) {
    json o{{"name", g.name}};
    switch (g.kind) {
      case CovariateGenerator::Kind::Binary:
        o["kind"] = "binary";
        o["probability"] = g.probability;
        o["beta"] = g.beta;
        break;
      case CovariateGenerator::Kind::Uniform:
        o["kind"] = "uniform";
        o["lo"] = g.lo;
        o["hi"] = g.hi;
        o["beta"] = g.beta;
        break;
      case CovariateGenerator::Kind::Categorical:
        o["kind"] = "categorical";
        o["levels"] = g.levels;
        o["probabilities"] = g.probabilities;
        o["betas"] = g.level_betas;
        break;
    }
    covs.push_back(o);
  }
  j["covariates"] = covs;
  return j;
}

SimConfig sim_config_from_json(const json& j) {
  try {
    SimConfig cfg;
    cfg.N_true = j.at("N_true").get<std::size_t>();
    cfg.tau = j.at("tau").get<double>();
    if (j.contains("alpha") && !j.at("alpha").is_null()) cfg.alpha = j.at("alpha").get<double>();
    cfg.phi = j.value("phi", 1.0);
    cfg.window.c1 = j.value("c1", 1);
    if (j.contains("c2") && !j.at("c2").is_null()) cfg.window.c2 = j.at("c2").get<int>();
    cfg.window.delta_b = number_or(j, "delta_b", kUnboundedTime);
    cfg.seed = j.value("seed", std::uint64_t{1});
    if (j.contains("baseline")) {
      const auto& b = j.at("baseline");
      const std::string kind = b.value("kind", "constant");
      if (kind == "constant") {
        cfg.baseline.kind = BaselineShape::Kind::Constant;
        cfg.baseline.level = b.value("level", 1.0);
      } else if (kind == "piecewise") {
        cfg.baseline.kind = BaselineShape::Kind::PiecewiseConstant;
        cfg.baseline.breakpoints = b.at("breakpoints").get<std::vector<double>>();
        cfg.baseline.levels = b.at("levels").get<std::vector<double>>();
      } else if (kind == "sinusoidal") {
        cfg.baseline.kind = BaselineShape::Kind::Sinusoidal;
        cfg.baseline.level = b.value("level", 1.0);
        cfg.baseline.amplitude = b.value("amplitude", 0.5);
        cfg.baseline.periods = b.value("periods", 1.0);
      } else {
        throw InputError("simulation: baseline kind must be constant, piecewise or sinusoidal");
      }
    }
    for (const auto& c : j.value("covariates", json::array())) {
      CovariateGenerator g;
      g.name = c.at("name").get<std::string>();
      const std::string kind = c.at("kind").get<std::string>();
      if (kind == "binary") {
        g.kind = CovariateGenerator::Kind::Binary;
        g.probability = c.value("probability", 0.5);
        g.beta = c.value("beta", 0.0);
      } else if (kind == "uniform") {
        g.kind = CovariateGenerator::Kind::Uniform;
        g.lo = c.value("lo", 0.0);
        g.hi = c.value("hi", 1.0);
        g.beta = c.value("beta", 0.0);
      } else if (kind == "categorical") {
        g.kind = CovariateGenerator::Kind::Categorical;
        g.levels = c.at("levels").get<std::vector<std::string>>();
        g.probabilities = c.at("probabilities").get<std::vector<double>>();
        g.level_betas = c.at("betas").get<std::vector<double>>();
      } else {
        throw InputError("simulation: covariate kind must be binary, uniform or categorical");
      }
      cfg.covariates.push_back(std::move(g));
    }
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw InputError(std::string("simulation config: ") + e.what());
  }
}

}  // namespace recap
