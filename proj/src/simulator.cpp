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

#include "recapture/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "parallel.hpp"
#include "recapture/error.hpp"

namespace recap {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

StreamRng::StreamRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(seed ^ mix64(stream + 0x632BE59BD9B4E019ULL))) {}

StreamRng::result_type StreamRng::operator()() { return mix64(key_ + (++counter_) * kGolden); }

double BaselineShape::rate(double t, double tau) const {
  switch (kind) {
    case Kind::Constant:
      return level;
    case Kind::PiecewiseConstant: {
      const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
      return levels[static_cast<std::size_t>(it - breakpoints.begin())];
    }
    case Kind::Sinusoidal:
      return level * (1.0 + amplitude * std::sin(2.0 * std::numbers::pi * periods * t / tau));
  }
  return level;
}

double BaselineShape::sup() const {
  switch (kind) {
    case Kind::Constant: return level;
    case Kind::PiecewiseConstant: return *std::max_element(levels.begin(), levels.end());
    case Kind::Sinusoidal: return level * (1.0 + amplitude);
  }
  return level;
}

void BaselineShape::validate() const {
  switch (kind) {
    case Kind::Constant:
      if (!(level > 0.0) || !std::isfinite(level)) throw InputError("baseline level must be positive");
      break;
    case Kind::PiecewiseConstant:
      if (levels.size() != breakpoints.size() + 1)
        throw InputError("piecewise baseline needs one more level than breakpoints");
      if (!std::is_sorted(breakpoints.begin(), breakpoints.end()))
        throw InputError("piecewise baseline breakpoints must be increasing");
      for (double l : levels)
        if (l < 0.0 || !std::isfinite(l)) throw InputError("piecewise baseline levels must be finite and >= 0");
      if (!(sup() > 0.0)) throw InputError("piecewise baseline is identically zero");
      break;
    case Kind::Sinusoidal:
      if (!(level > 0.0) || !std::isfinite(level)) throw InputError("baseline level must be positive");
      if (amplitude < 0.0 || amplitude >= 1.0) throw InputError("sinusoid amplitude must lie in [0, 1)");
      break;
  }
}

void SimConfig::validate() const {
  if (N_true == 0) throw InputError("N_true must be positive");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InputError("tau must be positive");
  if (alpha && !(*alpha > 0.0)) throw InputError("alpha must be positive");
  if (!(phi > 0.0) || !std::isfinite(phi)) throw InputError("phi must be positive");
  window.validate();
  baseline.validate();
  for (const auto& g : covariates) {
    if (g.name.empty()) throw InputError("covariate generator without a name");
    switch (g.kind) {
      case CovariateGenerator::Kind::Binary:
        if (g.probability < 0.0 || g.probability > 1.0) throw InputError("binary probability outside [0, 1]");
        break;
      case CovariateGenerator::Kind::Uniform:
        if (!(g.hi > g.lo)) throw InputError("uniform covariate needs hi > lo");
        break;
      case CovariateGenerator::Kind::Categorical:
        if (g.levels.size() < 2 || g.probabilities.size() != g.levels.size() ||
            g.level_betas.size() + 1 != g.levels.size())
          throw InputError("categorical covariate '" + g.name +
                           "' needs >= 2 levels, one probability per level and one beta per "
                           "non-reference level");
        break;
    }
  }
}

std::vector<std::string> SimConfig::design_names() const {
  std::vector<std::string> out;
  for (const auto& g : covariates) {
    if (g.kind == CovariateGenerator::Kind::Categorical)
      for (std::size_t l = 1; l < g.levels.size(); ++l) out.push_back(g.name + ":" + g.levels[l]);
    else
      out.push_back(g.name);
  }
  return out;
}

std::vector<double> SimConfig::design_betas() const {
  std::vector<double> out;
  for (const auto& g : covariates) {
    if (g.kind == CovariateGenerator::Kind::Categorical)
      out.insert(out.end(), g.level_betas.begin(), g.level_betas.end());
    else
      out.push_back(g.beta);
  }
  return out;
}

Dataset Simulation::observed() const {
  Dataset d;
  d.tau = config.tau;
  d.covariate_names = design_names;
  for (const auto& s : population) {
    if (s.times.empty()) continue;
    d.subjects.push_back(CaptureHistory{s.subject_id, s.times, s.design});
  }
  return d;
}

std::size_t Simulation::observed_count() const {
  return static_cast<std::size_t>(std::count_if(
      population.begin(), population.end(), [](const auto& s) { return !s.times.empty(); }));
}

Simulation simulate(const SimConfig& cfg, int threads) {
  cfg.validate();
  Simulation out;
  out.config = cfg;
  out.design_names = cfg.design_names();
  out.population.resize(cfg.N_true);
  const int width = static_cast<int>(std::to_string(cfg.N_true).size());
  const double majorant_base = std::max(cfg.phi, 1.0) * cfg.baseline.sup();

  detail::parallel_for(cfg.N_true, threads, [&](std::size_t i) {
    StreamRng rng(cfg.seed, i);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    SimulatedSubject& s = out.population[i];
    std::ostringstream id;
    id << "S";
    id.width(width);
    id.fill('0');
    id << (i + 1);
    s.subject_id = id.str();

    s.rho = 1.0;
    if (cfg.alpha) {
      std::gamma_distribution<double> frailty(*cfg.alpha, 1.0 / *cfg.alpha);
      s.rho = frailty(rng);
    }
    double eta = 0.0;
    for (const auto& g : cfg.covariates) {
      switch (g.kind) {
        case CovariateGenerator::Kind::Binary: {
          const double v = unif(rng) < g.probability ? 1.0 : 0.0;
          s.raw_covariates.push_back(v == 1.0 ? "1" : "0");
          s.design.push_back(v);
          eta += g.beta * v;
          break;
        }
        case CovariateGenerator::Kind::Uniform: {
          const double v = g.lo + (g.hi - g.lo) * unif(rng);
          std::ostringstream cell;
          cell.precision(17);
          cell << v;
          s.raw_covariates.push_back(cell.str());
          s.design.push_back(std::stod(cell.str()));
          eta += g.beta * s.design.back();
          break;
        }
        case CovariateGenerator::Kind::Categorical: {
          std::discrete_distribution<std::size_t> pick(g.probabilities.begin(), g.probabilities.end());
          const std::size_t level = pick(rng);
          s.raw_covariates.push_back(g.levels[level]);
          for (std::size_t l = 1; l < g.levels.size(); ++l) {
            s.design.push_back(l == level ? 1.0 : 0.0);
            if (l == level) eta += g.level_betas[l - 1];
          }
          break;
        }
      }
    }
    s.gamma = std::exp(eta);

    // Ogata thinning; the intensity is left-continuous in the capture count.
    const double majorant = s.rho * s.gamma * majorant_base;
    std::exponential_distribution<double> gap(majorant);
    const auto& w = cfg.window;
    double t = 0.0;
    for (;;) {
      t += gap(rng);
      if (t > cfg.tau) break;
      const auto count = static_cast<int>(s.times.size());
      const bool active = count >= w.c1 && count < w.c2 &&
                          t <= s.times[static_cast<std::size_t>(w.c1) - 1] + w.delta_b;
      const double rate = s.rho * s.gamma * cfg.baseline.rate(t, cfg.tau) * (active ? cfg.phi : 1.0);
      if (unif(rng) * majorant < rate) s.times.push_back(t);
    }
  });
  return out;
}

}  // namespace recap
