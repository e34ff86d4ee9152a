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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "recapture/error.hpp"
#include "recapture/model.hpp"

using namespace recap;

namespace {

CaptureHistory history(std::vector<double> times) { return {"s", std::move(times), {}}; }

BaselineFn identity_baseline(const std::vector<double>& grid, double tau) {
  // Omega(t) = t sampled on a grid of jump points
  std::vector<double> jumps(grid.size());
  double prev = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    jumps[k] = grid[k] - prev;
    prev = grid[k];
  }
  return BaselineFn(grid, jumps, tau);
}

CaptureHistory random_history(std::mt19937_64& rng, double tau) {
  std::uniform_int_distribution<int> count(1, 6);
  std::uniform_real_distribution<double> u(0.0, tau);
  std::set<double> t;
  const int n = count(rng);
  while (static_cast<int>(t.size()) < n) {
    const double x = u(rng);
    if (x > 0.0) t.insert(x);
  }
  return history(std::vector<double>(t.begin(), t.end()));
}

BaselineFn random_baseline(std::mt19937_64& rng, double tau) {
  std::uniform_real_distribution<double> u(0.0, tau), w(0.0, 1.0);
  std::set<double> t;
  while (t.size() < 12) t.insert(u(rng));
  std::vector<double> times(t.begin(), t.end()), jumps;
  for (std::size_t k = 0; k < times.size(); ++k) jumps.push_back(w(rng));
  return BaselineFn(times, jumps, tau);
}

BehaviorSpec random_window(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> c1(1, 3), extra(0, 3);
  std::uniform_real_distribution<double> db(0.05, 1.0);
  BehaviorSpec w;
  w.c1 = c1(rng);
  const int e = extra(rng);
  w.c2 = e == 0 ? kUnboundedCount : w.c1 + e;
  if (std::uniform_int_distribution<int>(0, 1)(rng)) w.delta_b = db(rng);
  return w;
}

}  // namespace

TEST_CASE("behavioral indicator") {
  const BehaviorSpec classic;
  const auto h = history({0.3, 0.6});
  CHECK_FALSE(behavioral_active(h, 0.1, classic));
  CHECK_FALSE(behavioral_active(h, 0.3, classic));  // own first capture is not affected
  CHECK(behavioral_active(h, 0.31, classic));
  CHECK(behavioral_active(h, 0.9, classic));

  const BehaviorSpec delayed{2, kUnboundedCount, 0.3};
  const auto h2 = history({0.2, 0.5});
  CHECK_FALSE(behavioral_active(h2, 0.9, delayed));
  CHECK_FALSE(behavioral_active(h2, 0.4, delayed));
  CHECK(behavioral_active(h2, 0.7, delayed));
  CHECK(behavioral_active(h2, 0.8, delayed));

  // finite memory in captures: the response stops at the c2-th capture
  const BehaviorSpec memory{1, 2, kUnboundedTime};
  const auto h3 = history({0.2, 0.5, 0.7});
  CHECK(behavioral_active(h3, 0.5, memory));
  CHECK_FALSE(behavioral_active(h3, 0.6, memory));
  CHECK_FALSE(behavioral_active(history({0.2}), 0.1, memory));
}

TEST_CASE("linear predictor") {
  const std::vector<double> zero{0.0, 0.0}, z{1.0, 0.0}, beta{-0.65, 0.1};
  CHECK(linear_predictor(z, zero) == 1.0);
  CHECK(linear_predictor(z, beta) == doctest::Approx(0.522).epsilon(1e-3));
  CHECK(linear_predictor(std::vector<double>{2.0}, std::vector<double>{0.5}) ==
        doctest::Approx(std::exp(1.0)).epsilon(1e-15));
  CHECK_THROWS_AS(linear_predictor(z, std::vector<double>{1.0}), InputError);
}

TEST_CASE("capture probability") {
  CHECK(capture_prob(1.0, 1.0, 0.0) == 0.0);
  CHECK(capture_prob(1.0, 1.0, std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(capture_prob(2.0, 0.5, std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(capture_prob(-1.0, 1.0, 1.0), InputError);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 3.0);
  for (int k = 0; k < 200; ++k) {
    const double r = u(rng), g = u(rng), o = u(rng), c = u(rng);
    const double p = capture_prob(r, g, o);
    CHECK(capture_prob(r * 1.01, g, o) > p);
    CHECK(capture_prob(r, g * 1.01, o) > p);
    CHECK(capture_prob(r, g, o * 1.01) > p);
    CHECK(capture_prob(c * r, g / c, o) == doctest::Approx(p).epsilon(1e-14));
  }
}

TEST_CASE("omega star") {
  const std::vector<double> grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  const auto omega = identity_baseline(grid, 1.0);
  CHECK(omega_star(history({0.4}), omega, 0.5, {}) == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(omega_star(history({0.2, 0.5}), omega, 0.5, BehaviorSpec{2, kUnboundedCount, kUnboundedTime}) ==
        doctest::Approx(0.75).epsilon(1e-14));
  CHECK(omega_star(history({0.2, 0.5}), omega, 1.0, {}) == omega.total());
  // window closed by delta_b: Omega(tau) + (1 - phi)(Omega(0.2) - Omega(0.5))
  CHECK(omega_star(history({0.2, 0.9}), omega, 0.5, BehaviorSpec{1, kUnboundedCount, 0.3}) ==
        doctest::Approx(1.0 + 0.5 * (0.2 - 0.5)).epsilon(1e-14));
}

TEST_CASE("omega star properties") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lphi(-2.0, 2.0);
  for (int k = 0; k < 500; ++k) {
    const auto h = random_history(rng, 1.0);
    const auto b = random_baseline(rng, 1.0);
    const auto w = random_window(rng);
    const double phi = std::exp(lphi(rng));
    CHECK(omega_star(h, b, 1.0, w) == b.total());
    const double os = omega_star(h, b, phi, w);
    CHECK(os >= std::min(phi, 1.0) * b.total() * (1.0 - 1e-14));
    CHECK(os <= std::max(phi, 1.0) * b.total() * (1.0 + 1e-14));
    const BehaviorSpec general{1, kUnboundedCount, kUnboundedTime};
    CHECK(omega_star(h, b, phi, general) == omega_star(h, b, phi, BehaviorSpec{}));
  }
}

TEST_CASE("behavioral exponent") {
  CHECK(behavioral_exponent(history({0.1, 0.2, 0.3}), {}) == 2);
  CHECK(behavioral_exponent(history({0.2, 0.5, 0.9}), BehaviorSpec{2, kUnboundedCount, kUnboundedTime}) == 1);
  CHECK(behavioral_exponent(history({0.5}), BehaviorSpec{1, 3, 0.2}) == 0);
  CHECK(behavioral_exponent(history({0.1, 0.2, 0.6}), BehaviorSpec{1, kUnboundedCount, 0.3}) == 1);
  CHECK(behavioral_exponent(history({0.1, 0.2, 0.3, 0.4}), BehaviorSpec{1, 3, kUnboundedTime}) == 2);

  std::mt19937_64 rng(9);
  for (int k = 0; k < 1000; ++k) {
    const auto h = random_history(rng, 1.0);
    CHECK(behavioral_exponent(h, {}) == static_cast<int>(h.captures()) - 1);
    // the exponent counts exactly the captures made while the indicator is on
    const auto w = random_window(rng);
    int on = 0;
    for (double t : h.times) on += behavioral_active(h, t, w);
    CHECK(behavioral_exponent(h, w) == on);
  }
}

TEST_CASE("identifiability") {
  const std::vector<CaptureHistory> twice{history({0.1, 0.4}), history({0.3})};
  CHECK(validate_identifiability(twice, {}).ok);
  const std::vector<CaptureHistory> once{history({0.1}), history({0.3})};
  const auto bad = validate_identifiability(once, {});
  CHECK_FALSE(bad.ok);
  CHECK_FALSE(bad.diagnostic.empty());
  const std::vector<CaptureHistory> late{history({0.2, 0.5, 0.9})};
  const auto d = validate_identifiability(late, BehaviorSpec{2, kUnboundedCount, 0.1});
  CHECK_FALSE(d.ok);
  CHECK(d.diagnostic.find("delta_b") != std::string::npos);
  CHECK(validate_identifiability(late, BehaviorSpec{2, kUnboundedCount, 0.5}).ok);
  CHECK_THROWS_AS(validate_identifiability(std::vector<CaptureHistory>{}, {}), InputError);
}

TEST_CASE("model lattice") {
  const auto names = ModelSpec::lattice_names();
  CHECK(names.size() == 16);
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == 16);
  for (const auto& n : names) CHECK(ModelSpec::from_name(n, 1.0).name() == n);
  const auto m0 = ModelSpec::from_name("M_0", 2.0);
  CHECK_FALSE(m0.frailty);
  CHECK_FALSE(m0.covariates);
  CHECK_FALSE(m0.time_varying);
  CHECK_FALSE(m0.behavior);
  const auto full = ModelSpec::from_name("Mhotb", 2.0);
  CHECK(full.frailty);
  CHECK(full.covariates);
  CHECK(full.time_varying);
  CHECK(full.behavior);
  CHECK(ModelSpec::from_name("hb", 1.0).name() == "hb");
  CHECK_THROWS_AS(ModelSpec::from_name("bh", 1.0), InputError);
  CHECK_THROWS_AS(ModelSpec::from_name("hotbx", 1.0), InputError);
  CHECK_THROWS_AS(ModelSpec::from_name("", 1.0), InputError);
  CHECK_THROWS_AS(ModelSpec::from_name("hotb", -1.0), InputError);
}

TEST_CASE("behavior spec validation") {
  CHECK_NOTHROW(BehaviorSpec{}.validate());
  CHECK(BehaviorSpec{}.classic());
  CHECK_THROWS_AS((BehaviorSpec{0, kUnboundedCount, kUnboundedTime}.validate()), InputError);
  CHECK_THROWS_AS((BehaviorSpec{2, 2, kUnboundedTime}.validate()), InputError);
  CHECK_THROWS_AS((BehaviorSpec{1, kUnboundedCount, 0.0}.validate()), InputError);
  CHECK_FALSE((BehaviorSpec{1, 3, kUnboundedTime}.classic()));
}

TEST_CASE("baseline step function") {
  const BaselineFn b({0.2, 0.5}, std::vector<double>{1.0, 2.0}, 1.0);
  CHECK(b(0.0) == 0.0);
  CHECK(b(0.1999) == 0.0);
  CHECK(b(0.2) == 1.0);
  CHECK(b(0.4) == 1.0);
  CHECK(b(0.5) == 3.0);
  CHECK(b(1.0) == 3.0);
  CHECK(b(kUnboundedTime) == 3.0);
  CHECK(b.total() == 3.0);
  std::mt19937_64 rng(1);
  const auto r = random_baseline(rng, 2.0);
  double prev = 0.0;
  for (double t = 0.0; t <= 2.5; t += 0.01) {
    CHECK(r(t) >= prev);
    prev = r(t);
  }
}

TEST_CASE("history validation") {
  CHECK_NOTHROW(validate_history(history({0.1, 1.0}), 1.0));
  CHECK_THROWS_AS(validate_history(history({}), 1.0), InputError);
  CHECK_THROWS_AS(validate_history(history({0.0, 0.5}), 1.0), InputError);
  CHECK_THROWS_AS(validate_history(history({0.5, 1.5}), 1.0), InputError);
  CHECK_THROWS_AS(validate_history(history({0.5, 0.3}), 1.0), InputError);
  CHECK_THROWS_AS(validate_history(history({0.5, 0.5}), 1.0), InputError);
}
