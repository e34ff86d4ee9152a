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

#include "recapture/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

#include "recapture/error.hpp"

namespace recap {

std::size_t Dataset::total_captures() const noexcept {
  std::size_t k = 0;
  for (const auto& s : subjects) k += s.captures();
  return k;
}

void BehaviorSpec::validate() const {
  if (c1 < 1) throw InputError("behavior: c1 must be >= 1");
  if (c2 != kUnboundedCount && c2 <= c1) throw InputError("behavior: c2 must exceed c1");
  if (!(delta_b > 0.0)) throw InputError("behavior: delta_b must be positive");
}

std::string BehaviorSpec::label() const {
  std::ostringstream out;
  out << "c1=" << c1 << ",c2=";
  if (c2 == kUnboundedCount) out << "inf"; else out << c2;
  out << ",delta_b=";
  if (std::isinf(delta_b)) out << "inf"; else out << delta_b;
  return out.str();
}

ModelSpec ModelSpec::from_name(std::string_view name, double tau, BehaviorSpec window) {
  std::string key(name);
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (key.rfind("m_", 0) == 0) key.erase(0, 2);
  else if (!key.empty() && key[0] == 'm') key.erase(0, 1);

  ModelSpec spec;
  spec.tau = tau;
  spec.window = window;
  spec.frailty = spec.covariates = spec.time_varying = spec.behavior = false;
  if (key != "0") {
    if (key.empty()) throw InputError("unknown model name '" + std::string(name) + "'");
    // Letters must appear in h, o, t, b order, each at most once.
    const std::string order = "hotb";
    std::size_t pos = 0;
    for (char c : key) {
      const auto at = order.find(c, pos);
      if (at == std::string::npos)
        throw InputError("unknown model name '" + std::string(name) + "'");
      pos = at + 1;
      switch (c) {
        case 'h': spec.frailty = true; break;
        case 'o': spec.covariates = true; break;
        case 't': spec.time_varying = true; break;
        case 'b': spec.behavior = true; break;
      }
    }
  }
  spec.validate();
  return spec;
}

std::vector<std::string> ModelSpec::lattice_names() {
  return {"hotb", "hob", "htb", "hot", "otb", "ho", "ht", "hb",
          "ot",   "tb",  "ob",  "h",   "o",   "t",  "b",  "0"};
}

std::string ModelSpec::name() const {
  std::string out;
  if (frailty) out += 'h';
  if (covariates) out += 'o';
  if (time_varying) out += 't';
  if (behavior) out += 'b';
  return out.empty() ? "0" : out;
}

void ModelSpec::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InputError("tau must be positive and finite");
  window.validate();
}

double ParamState::phi() const noexcept { return std::exp(log_phi); }
double ParamState::alpha() const noexcept { return std::exp(log_alpha); }
double ParamState::omega_tau() const noexcept { return std::exp(log_omega_tau); }

BaselineFn::BaselineFn(std::vector<double> times, std::span<const double> jumps, double tau)
    : times_(std::move(times)), tau_(tau) {
  if (times_.size() != jumps.size()) throw InputError("baseline: times/jumps size mismatch");
  cumulative_.resize(times_.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < times_.size(); ++k) {
    if (jumps[k] < 0.0) throw InputError("baseline: negative jump");
    if (k > 0 && !(times_[k] > times_[k - 1])) throw InputError("baseline: times not increasing");
    acc += jumps[k];
    cumulative_[k] = acc;
  }
  total_ = acc;
}

double BaselineFn::operator()(double t) const {
  if (t >= tau_) return total_;
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return 0.0;
  return cumulative_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

std::optional<ActiveWindow> behavioral_window(const CaptureHistory& history,
                                              const BehaviorSpec& spec) {
  const auto n = history.times.size();
  if (spec.c1 < 1 || static_cast<std::size_t>(spec.c1) > n) return std::nullopt;
  const double start = history.times[static_cast<std::size_t>(spec.c1) - 1];
  double end = start + spec.delta_b;
  if (spec.c2 != kUnboundedCount && static_cast<std::size_t>(spec.c2) <= n)
    end = std::min(end, history.times[static_cast<std::size_t>(spec.c2) - 1]);
  return ActiveWindow{start, end};
}

bool behavioral_active(const CaptureHistory& history, double t, const BehaviorSpec& spec) {
  const auto w = behavioral_window(history, spec);
  return w && t > w->start && t <= w->end;
}

double linear_predictor(std::span<const double> z, std::span<const double> beta) {
  if (z.size() != beta.size()) throw InputError("linear_predictor: length mismatch");
  return std::exp(std::inner_product(z.begin(), z.end(), beta.begin(), 0.0));
}

double capture_prob(double rho, double gamma, double omega_tau) {
  if (rho < 0.0 || gamma < 0.0 || omega_tau < 0.0)
    throw InputError("capture_prob: negative argument");
  return -std::expm1(-rho * gamma * omega_tau);
}

double omega_star(const CaptureHistory& history, const BaselineFn& baseline, double phi,
                  const BehaviorSpec& spec) {
  const double total = baseline.total();
  const auto w = behavioral_window(history, spec);
  if (!w) return total;
  return total + (1.0 - phi) * (baseline(w->start) - baseline(w->end));
}

int behavioral_exponent(const CaptureHistory& history, const BehaviorSpec& spec) {
  const auto w = behavioral_window(history, spec);
  if (!w) return 0;
  int count = 0;
  for (double t : history.times)
    if (t > w->start && t <= w->end) ++count;
  return count;
}

IdentifiabilityCheck validate_identifiability(std::span<const CaptureHistory> data,
                                              const BehaviorSpec& spec) {
  if (data.empty()) throw InputError("validate_identifiability: empty dataset");
  const auto need = static_cast<std::size_t>(spec.c1) + 1;
  bool any_enough = false;
  for (const auto& h : data) {
    if (h.captures() < need) continue;
    any_enough = true;
    const double start = h.times[need - 2];
    const double next = h.times[need - 1];
    if (next > start && next < start + spec.delta_b) return {true, {}};
  }
  std::ostringstream msg;
  if (!any_enough)
    msg << "no subject has at least c1+1 = " << need << " captures; phi is not identifiable";
  else
    msg << "no subject makes capture " << need << " within delta_b = " << spec.delta_b
        << " of capture " << spec.c1 << "; phi is not identifiable";
  return {false, msg.str()};
}

void validate_history(const CaptureHistory& history, double tau) {
  if (history.times.empty())
    throw InputError("subject '" + history.subject_id + "' has no captures");
  for (std::size_t j = 0; j < history.times.size(); ++j) {
    const double t = history.times[j];
    if (!(t > 0.0) || t > tau || !std::isfinite(t)) {
      std::ostringstream msg;
      msg << "subject '" << history.subject_id << "': capture time " << t
          << " outside (0, " << tau << "]";
      throw InputError(msg.str());
    }
    if (j > 0 && !(t > history.times[j - 1])) {
      std::ostringstream msg;
      msg << "subject '" << history.subject_id << "': capture times must be strictly increasing"
          << " (duplicate or unsorted at " << t << ")";
      throw InputError(msg.str());
    }
  }
}

void validate_dataset(const Dataset& data) {
  if (!(data.tau > 0.0)) throw InputError("tau must be positive");
  if (data.subjects.empty()) throw InputError("dataset has no captured subjects");
  for (const auto& h : data.subjects) {
    validate_history(h, data.tau);
    if (h.covariates.size() != data.covariate_names.size())
      throw InputError("subject '" + h.subject_id + "': covariate vector has wrong length");
  }
}

}  // namespace recap
