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

// Random small capture-recapture instances shared by the test programs.

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include "recapture/likelihood.hpp"
#include "recapture/model.hpp"

namespace recap::testing {

struct Instance {
  Dataset data;
  ModelSpec spec;
  ParamState params;
};

inline BehaviorSpec random_window(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> c1(1, 2), extra(0, 2), coin(0, 1);
  BehaviorSpec w;
  w.c1 = c1(rng);
  const int e = extra(rng);
  w.c2 = e == 0 ? kUnboundedCount : w.c1 + e;
  if (coin(rng)) w.delta_b = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
  return w;
}

/// n <= max_n subjects with 1..max_captures captures on (0, 1], p covariates,
/// and parameters consistent with the jumps (Omega(tau) = sum theta).
inline Instance random_instance(std::mt19937_64& rng, const std::string& model = "hotb",
                                std::size_t max_n = 10, int max_captures = 4, std::size_t p = 2,
                                bool ties = false) {
  Instance out;
  out.data.tau = 1.0;
  std::uniform_int_distribution<std::size_t> n_dist(1, max_n);
  std::uniform_int_distribution<int> c_dist(1, max_captures);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  const std::size_t n = n_dist(rng);
  for (std::size_t h = 0; h < p; ++h) out.data.covariate_names.push_back("z" + std::to_string(h));
  for (std::size_t i = 0; i < n; ++i) {
    CaptureHistory s;
    s.subject_id = "s" + std::to_string(i);
    std::set<double> t;
    const int c = c_dist(rng);
    while (static_cast<int>(t.size()) < c) {
      double x = u(rng);
      if (ties) x = std::ceil(x * 8.0) / 8.0;
      if (x > 0.0) t.insert(x);
      if (ties && t.size() == 8) break;
    }
    s.times.assign(t.begin(), t.end());
    for (std::size_t h = 0; h < p; ++h) s.covariates.push_back(z(rng));
    out.data.subjects.push_back(std::move(s));
  }
  out.spec = ModelSpec::from_name(model, 1.0, random_window(rng));
  const auto ctx = LikContext::build(out.data, out.spec);
  auto& prm = out.params;
  std::normal_distribution<double> b(0.0, 0.5);
  if (out.spec.covariates)
    for (std::size_t h = 0; h < p; ++h) prm.beta.push_back(b(rng));
  prm.log_phi = out.spec.behavior ? std::uniform_real_distribution<double>(-1.0, 1.0)(rng) : 0.0;
  prm.log_alpha = out.spec.frailty ? std::uniform_real_distribution<double>(std::log(0.3), std::log(20.0))(rng)
                                   : std::numeric_limits<double>::infinity();
  const double scale = std::exp(std::uniform_real_distribution<double>(-1.5, 1.0)(rng));
  double total = 0.0;
  for (std::size_t k = 0; k < ctx.events(); ++k) {
    prm.theta.push_back(scale * (0.05 + u(rng)) / static_cast<double>(ctx.events()));
    total += prm.theta.back();
  }
  prm.log_omega_tau = std::log(total);
  return out;
}

/// Positive frailty means drawn around 1.
inline std::vector<double> random_rho(std::mt19937_64& rng, std::size_t n) {
  std::gamma_distribution<double> g(3.0, 1.0 / 3.0);
  std::vector<double> out(n);
  for (auto& r : out) r = std::max(0.05, g(rng));
  return out;
}

}  // namespace recap::testing
