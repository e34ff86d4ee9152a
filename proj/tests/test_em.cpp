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

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "instances.hpp"
#include "recapture/em.hpp"
#include "recapture/oracle.hpp"
#include "recapture/simulator.hpp"

using namespace recap;
using recap::testing::random_instance;
using recap::testing::random_rho;

namespace {

Dataset from_frequencies(const std::vector<long long>& f) {
  Dataset d;
  d.tau = 1.0;
  long long total = 0;
  for (std::size_t j = 0; j < f.size(); ++j) total += static_cast<long long>(j + 1) * f[j];
  long long next = 0;
  std::size_t id = 0;
  for (std::size_t j = 0; j < f.size(); ++j)
    for (long long s = 0; s < f[j]; ++s) {
      CaptureHistory sub;
      sub.subject_id = "s" + std::to_string(id++);
      for (std::size_t c = 0; c <= j; ++c)
        sub.times.push_back(static_cast<double>(++next) / static_cast<double>(total + 1));
      d.subjects.push_back(std::move(sub));
    }
  return d;
}

double m0_root(double n, double K) {
  const auto f = [&](double mu) { return -std::expm1(-mu) / mu - n / K; };
  boost::uintmax_t it = 200;
  const auto r = boost::math::tools::bisect(f, 1e-12, 100.0,
                                            boost::math::tools::eps_tolerance<double>(50), it);
  return 0.5 * (r.first + r.second);
}

SimConfig htb_config(std::uint64_t seed, std::size_t N = 400) {
  SimConfig c;
  c.N_true = N;
  c.alpha = 2.0;
  c.phi = 0.5;
  c.baseline.level = 1.5;
  c.covariates = {{"x", CovariateGenerator::Kind::Binary, 0.5, 0.0, 1.0, 0.7, {}, {}, {}}};
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("e-step near-degenerate frailty") {
  std::mt19937_64 rng(1);
  for (int r = 0; r < 20; ++r) {
    auto inst = random_instance(rng, "hotb");
    inst.params.log_alpha = std::log(1e6);
    const auto ctx = LikContext::build(inst.data, inst.spec);
    for (double v : e_step(inst.params, ctx)) {
      CHECK(v > 0.999);
      CHECK(v < 1.001);
    }
  }
}

TEST_CASE("e-step matches the posterior quadrature") {
  std::mt19937_64 rng(2);
  for (int r = 0; r < 60; ++r) {
    const auto inst = random_instance(rng, r % 2 ? "hotb" : "hob");
    const auto ctx = LikContext::build(inst.data, inst.spec);
    for (std::size_t i = 0; i < ctx.n; ++i) {
      const double want = oracle::posterior_mean(inst.data, i, inst.params, inst.spec);
      CHECK(e_step_rho(i, inst.params, ctx) == doctest::Approx(want).epsilon(1e-8));
    }
  }
}

TEST_CASE("more captures give a larger posterior frailty") {
  Dataset d;
  d.tau = 1.0;
  d.subjects = {{"a", {0.2, 0.5, 0.7}, {}}, {"b", {0.2, 0.5}, {}}};
  const auto spec = ModelSpec::from_name("ht", 1.0);
  const auto ctx = LikContext::build(d, spec);
  ParamState p;
  p.log_alpha = std::log(1.5);
  p.theta = {0.4, 0.4, 0.4};
  p.log_omega_tau = std::log(1.2);
  const double r1 = e_step_rho(0, p, ctx), r2 = e_step_rho(1, p, ctx);
  CHECK(r1 > r2);
  CHECK(r1 == doctest::Approx(oracle::posterior_mean(d, 0, p, spec)).epsilon(1e-9));
  CHECK(r2 == doctest::Approx(oracle::posterior_mean(d, 1, p, spec)).epsilon(1e-9));
}

TEST_CASE("baseline update examples") {
  SUBCASE("single capture") {
    Dataset d;
    d.tau = 1.0;
    d.subjects = {{"a", {0.5}, {}}};
    const auto ctx = LikContext::build(d, ModelSpec::from_name("htb", 1.0));
    for (double phi : {0.2, 1.0, 4.0}) {
      ParamState p;
      p.log_phi = std::log(phi);
      p.theta = {0.9};
      p.log_omega_tau = std::log(0.9);
      const auto th = baseline_update(p, std::vector<double>{1.0}, ctx);
      CHECK(th[0] == doctest::Approx(-std::expm1(-0.9)).epsilon(1e-14));
    }
  }
  SUBCASE("duplicated data") {
    std::mt19937_64 rng(3);
    for (int r = 0; r < 20; ++r) {
      const auto inst = random_instance(rng, "hotb");
      const auto ctx = LikContext::build(inst.data, inst.spec);
      const auto rho = random_rho(rng, ctx.n);
      Dataset twice = inst.data;
      for (auto s : inst.data.subjects) {
        s.subject_id += "'";
        twice.subjects.push_back(s);
      }
      auto rho2 = rho;
      rho2.insert(rho2.end(), rho.begin(), rho.end());
      const auto a = baseline_update(inst.params, rho, ctx);
      const auto b = baseline_update(inst.params, rho2, LikContext::build(twice, inst.spec));
      REQUIRE(a.size() == b.size());
      for (std::size_t k = 0; k < a.size(); ++k) CHECK(b[k] == doctest::Approx(a[k]).epsilon(1e-13));
    }
  }
  SUBCASE("no effects") {
    std::mt19937_64 rng(4);
    for (int r = 0; r < 20; ++r) {
      auto inst = random_instance(rng, "hotb");
      inst.params.log_phi = 0.0;
      std::fill(inst.params.beta.begin(), inst.params.beta.end(), 0.0);
      const auto ctx = LikContext::build(inst.data, inst.spec);
      const auto th = baseline_update(inst.params, std::vector<double>(ctx.n, 1.0), ctx);
      const double w = -std::expm1(-inst.params.omega_tau());
      for (std::size_t k = 0; k < th.size(); ++k)
        CHECK(th[k] == doctest::Approx(ctx.dN[k] * w / static_cast<double>(ctx.n)).epsilon(1e-13));
    }
  }
}

TEST_CASE("alpha update") {
  const auto capped = alpha_update(std::vector<double>(10, 1.0), 1e8);
  CHECK(capped.capped);
  CHECK(capped.alpha == 1e8);

  std::mt19937_64 rng(5);
  std::gamma_distribution<double> g(5.0, 0.2);
  std::vector<double> draws(100000);
  for (auto& v : draws) v = g(rng);
  const auto a = alpha_update(draws);
  CHECK_FALSE(a.capped);
  CHECK(std::abs(a.alpha - 5.0) <= 0.25);

  const std::vector<double> two{0.5, 1.5};
  const auto objective = [&](double al) {
    double s = 0.0;
    for (double r : two) s += al * std::log(al) - std::lgamma(al) + (al - 1.0) * std::log(r) - al * r;
    return s;
  };
  double best = 0.0, best_v = -1e300;
  for (double al = 0.01; al < 20.0; al += 1e-4)
    if (objective(al) > best_v) best_v = objective(al), best = al;
  for (double al = best - 1e-4; al < best + 1e-4; al += 1e-8)
    if (objective(al) > best_v) best_v = objective(al), best = al;
  const auto two_pt = alpha_update(two);
  CHECK(std::abs(two_pt.alpha - best) <= 1e-6);
  // stationarity
  const double s = std::log(two_pt.alpha) + 1.0 - boost::math::digamma(two_pt.alpha) +
                   0.5 * (std::log(0.5) + std::log(1.5)) - 1.0;
  CHECK(std::abs(s) <= 1e-10);
}

TEST_CASE("m-step solves the score system") {
  std::mt19937_64 rng(6);
  EmConfig cfg;
  int solved = 0;
  for (int r = 0; r < 30; ++r) {
    const auto inst = random_instance(rng, r % 2 ? "hotb" : "hob", 10, 4, 1);
    const auto ctx = LikContext::build(inst.data, inst.spec);
    const auto rho = random_rho(rng, ctx.n);
    ParamState out;
    try {
      out = m_step(inst.params, rho, ctx, cfg);
    } catch (const StepFailure&) {
      continue;  // tiny random instances may have no interior optimum
    }
    ++solved;
    const auto g = score_vector(out, rho, ctx);
    const auto coords = Coordinates::for_model(ctx);
    for (auto j : coords.full_indices()) CHECK(std::abs(g[j]) < 1e-6);
    double total = 0.0;
    for (double t : out.theta) total += t;
    CHECK(total == doctest::Approx(out.omega_tau()).epsilon(1e-10));

    const auto again = m_step(out, rho, ctx, cfg);
    CHECK(again.log_phi == doctest::Approx(out.log_phi).epsilon(1e-9));
    CHECK(again.log_omega_tau == doctest::Approx(out.log_omega_tau).epsilon(1e-9));
    for (std::size_t h = 0; h < out.beta.size(); ++h) CHECK(std::abs(again.beta[h] - out.beta[h]) <= 1e-9);
  }
  CHECK(solved >= 10);
}

TEST_CASE("m-step on M0 data reproduces the truncated Poisson root") {
  const Dataset d = from_frequencies({40, 12, 5, 2});
  const auto ctx = LikContext::build(d, ModelSpec::from_name("0", 1.0));
  auto p = initial_state(ctx);
  const auto out = m_step(p, std::vector<double>(ctx.n, 1.0), ctx, EmConfig{});
  CHECK(out.omega_tau() == doctest::Approx(m0_root(59.0, 40.0 + 24.0 + 15.0 + 8.0)).epsilon(1e-8));
}

TEST_CASE("M0 fit on the cannabis counting distribution") {
  const Dataset d = from_frequencies({50785, 1124, 60, 4});
  REQUIRE(d.total_captures() == 53229);
  const auto res = fit(d, ModelSpec::from_name("0", 1.0));
  CHECK(res.converged);
  const double mu = m0_root(51973.0, 53229.0);
  CHECK(res.params.omega_tau() == doctest::Approx(mu).epsilon(1e-8));
  CHECK(res.params.omega_tau() == doctest::Approx(0.0479).epsilon(0.01));
  CHECK(53229.0 / res.params.omega_tau() == doctest::Approx(1.11e6).epsilon(0.005));
}

TEST_CASE("fit invariants on simulated data") {
  EmConfig cfg;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto sim = simulate(htb_config(seed));
    const Dataset d = sim.observed();
    for (const char* model : {"hotb", "otb", "htb"}) {
      const auto spec = ModelSpec::from_name(model, 1.0);
      const auto res = fit(d, spec, cfg);
      INFO("seed " << seed << " model " << std::string(model));
      CHECK(res.converged);
      const auto ctx = LikContext::build(d, spec);
      CHECK(res.loglik == doctest::Approx(total_cond_loglik(res.params, ctx)).epsilon(1e-12));
      CHECK(res.info_matrix.rows() == static_cast<Eigen::Index>(res.score.size()));
      CHECK((res.info_matrix - res.info_matrix.transpose()).cwiseAbs().maxCoeff() == 0.0);
      for (double s : res.score) CHECK(std::abs(s) < 1e-6);
      CHECK(std::abs(res.constraint_residual) <= 1e-8);

      std::size_t drops = 0, damped_warnings = 0;
      for (std::size_t k = 1; k < res.loglik_trace.size(); ++k)
        if (res.loglik_trace[k] < res.loglik_trace[k - 1] - 1e-10 * std::abs(res.loglik_trace[k - 1])) ++drops;
      for (const auto& w : res.warnings)
        if (w.find("damped") != std::string::npos) ++damped_warnings;
      CHECK(damped_warnings >= drops);

      Eigen::LLT<Eigen::MatrixXd> llt(res.info_matrix);
      const bool pd = llt.info() == Eigen::Success;
      const bool warned = std::any_of(res.warnings.begin(), res.warnings.end(), [](const std::string& w) {
        return w.find("positive definite") != std::string::npos;
      });
      CHECK(pd != warned);
    }
  }
}

TEST_CASE("fit is invariant to subject order") {
  const auto sim = simulate(htb_config(21));
  Dataset d = sim.observed();
  const auto spec = ModelSpec::from_name("hotb", 1.0);
  const auto a = fit(d, spec);
  std::mt19937_64 rng(1);
  std::shuffle(d.subjects.begin(), d.subjects.end(), rng);
  const auto b = fit(d, spec);
  REQUIRE(a.loglik_trace.size() == b.loglik_trace.size());
  for (std::size_t k = 0; k < a.loglik_trace.size(); ++k)
    CHECK(std::abs(a.loglik_trace[k] - b.loglik_trace[k]) <= 1e-12 * std::max(1.0, std::abs(a.loglik_trace[k])));
}

TEST_CASE("threads do not change the fit") {
  const auto sim = simulate(htb_config(31));
  const Dataset d = sim.observed();
  const auto spec = ModelSpec::from_name("hotb", 1.0);
  EmConfig one, four;
  four.threads = 4;
  const auto a = fit(d, spec, one), b = fit(d, spec, four);
  CHECK(a.loglik_trace == b.loglik_trace);
  CHECK(a.params.theta == b.params.theta);
}

TEST_CASE("frailty-free fits recover the simulation truth") {
  std::vector<double> phi, beta, omega;
  for (std::uint64_t seed = 100; seed < 108; ++seed) {
    auto c = htb_config(seed, 2000);
    c.alpha.reset();
    const auto res = fit(simulate(c).observed(), ModelSpec::from_name("otb", 1.0));
    REQUIRE(res.converged);
    phi.push_back(res.params.phi());
    beta.push_back(res.params.beta[0]);
    omega.push_back(res.params.omega_tau());
  }
  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  CHECK(mean(phi) == doctest::Approx(0.5).epsilon(0.1));
  CHECK(mean(beta) == doctest::Approx(0.7).epsilon(0.1));
  CHECK(mean(omega) == doctest::Approx(1.5).epsilon(0.1));
}

TEST_CASE("config validation") {
  EmConfig c;
  CHECK_NOTHROW(c.validate());
  c.damping = 1.5;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = {};
  c.max_iter = 0;
  CHECK_THROWS_AS(c.validate(), InputError);
}
