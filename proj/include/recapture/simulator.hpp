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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "recapture/model.hpp"

namespace recap {

/// Counter-based 64-bit generator: output n of stream s is
/// splitmix64(key(seed, s) + n * golden_gamma). Each simulated subject owns
/// its own stream, so results do not depend on the order or the thread on
/// which subjects are generated.
class StreamRng {
 public:
  using result_type = std::uint64_t;
  StreamRng(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct BaselineShape {
  enum class Kind { Constant, PiecewiseConstant, Sinusoidal };
  Kind kind = Kind::Constant;
  double level = 1.0;               // constant rate / mean of the sinusoid
  std::vector<double> breakpoints;  // piecewise: interior change points
  std::vector<double> levels;       // piecewise: breakpoints.size() + 1 rates
  double amplitude = 0.5;           // sinusoid: relative amplitude in [0, 1)
  double periods = 1.0;             // sinusoid: full periods over [0, tau]

  double rate(double t, double tau) const;
  double sup() const;
  void validate() const;
};

struct CovariateGenerator {
  enum class Kind { Binary, Uniform, Categorical };
  std::string name;
  Kind kind = Kind::Binary;
  double probability = 0.5;  // binary
  double lo = 0.0, hi = 1.0;  // uniform
  double beta = 0.0;          // binary / uniform log hazard ratio
  std::vector<std::string> levels;        // categorical; the first is the reference
  std::vector<double> probabilities;      // categorical
  std::vector<double> level_betas;        // categorical, one per non-reference level
};

struct SimConfig {
  std::size_t N_true = 1000;
  double tau = 1.0;
  std::optional<double> alpha;  // nullopt: no frailty (rho = 1)
  double phi = 1.0;
  BehaviorSpec window;
  std::vector<CovariateGenerator> covariates;
  BaselineShape baseline;
  std::uint64_t seed = 1;

  void validate() const;
  /// Names of the numeric design columns (categoricals expanded to name:level).
  std::vector<std::string> design_names() const;
  std::vector<double> design_betas() const;
};

struct SimulatedSubject {
  std::string subject_id;
  std::vector<double> times;
  std::vector<std::string> raw_covariates;  // one cell per generator
  std::vector<double> design;               // expanded numeric row
  double rho = 1.0;
  double gamma = 1.0;
};

struct Simulation {
  SimConfig config;
  std::vector<std::string> design_names;
  std::vector<SimulatedSubject> population;

  /// Subjects with at least one capture, as an analysis dataset.
  Dataset observed() const;
  std::size_t observed_count() const;
};

/// Draws rho ~ Ga(alpha, alpha) and covariates per subject, then capture
/// times on [0, tau] by thinning against rho gamma max(phi, 1) sup(omega).
Simulation simulate(const SimConfig& cfg, int threads = 1);

}  // namespace recap
