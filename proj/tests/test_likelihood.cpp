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

#include <cmath>
#include <random>

#include "instances.hpp"
#include "recapture/error.hpp"
#include "recapture/likelihood.hpp"
#include "recapture/oracle.hpp"
#include "recapture/special.hpp"

using namespace recap;
using recap::testing::random_instance;
using recap::testing::random_rho;

namespace {

double log_gamma_pdf(double r, double a) {
  return a * std::log(a) - std::lgamma(a) + (a - 1.0) * std::log(r) - a * r;
}

Dataset two_subjects() {
  Dataset d;
  d.tau = 1.0;
  d.covariate_names = {"x"};
  d.subjects = {{"a", {0.3, 0.6}, {1.0}}, {"b", {0.6}, {0.0}}};
  return d;
}

}  // namespace

TEST_CASE("context caches") {
  std::mt19937_64 rng(1);
  for (int r = 0; r < 50; ++r) {
    const auto inst = random_instance(rng, "hotb", 10, 4, 2, r % 2 == 0);
    const auto ctx = LikContext::build(inst.data, inst.spec);
    double dn = 0.0;
    for (double v : ctx.dN) dn += v;
    CHECK(dn == static_cast<double>(inst.data.total_captures()));
    CHECK(std::is_sorted(ctx.event_times.begin(), ctx.event_times.end()));
    const auto os = ctx.omega_stars(inst.params);
    const auto base = ctx.baseline(inst.params);
    for (std::size_t i = 0; i < ctx.n; ++i)
      CHECK(os[i] == doctest::Approx(omega_star(inst.data.subjects[i], base, inst.params.phi(), inst.spec.window))
                         .epsilon(1e-13));
  }
  auto bad = ModelSpec::from_name("hotb", 2.0);
  CHECK_THROWS_AS(LikContext::build(two_subjects(), bad), InputError);
}

TEST_CASE("closed form matches quadrature") {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int r = 0; r < 200; ++r) {
    const auto inst = random_instance(rng, r % 3 == 0 ? "htb" : r % 3 == 1 ? "hob" : "hotb");
    const auto ctx = LikContext::build(inst.data, inst.spec);
    const double closed = total_cond_loglik(inst.params, ctx);
    const double quad = oracle::cond_loglik(inst.data, inst.params, inst.spec);
    worst = std::max(worst, std::abs(closed - quad));
    CHECK(std::abs(subject_cond_loglik(0, inst.params, ctx) -
                   oracle::subject_cond_loglik(inst.data, 0, inst.params, inst.spec)) <= 1e-8);
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("frailty-free closed form") {
  std::mt19937_64 rng(4);
  for (int r = 0; r < 30; ++r) {
    const auto inst = random_instance(rng, "otb");
    const auto ctx = LikContext::build(inst.data, inst.spec);
    CHECK(total_cond_loglik(inst.params, ctx) ==
          doctest::Approx(oracle::cond_loglik(inst.data, inst.params, inst.spec)).epsilon(1e-12));
  }
}

TEST_CASE("large alpha approaches the fixed frailty") {
  std::mt19937_64 rng(5);
  for (int r = 0; r < 20; ++r) {
    auto inst = random_instance(rng, "hotb");
    inst.params.log_alpha = std::log(1e7);
    const auto ctx = LikContext::build(inst.data, inst.spec);
    auto fixed = inst.spec;
    fixed.frailty = false;
    const auto ctx0 = LikContext::build(inst.data, fixed);
    CHECK(std::abs(total_cond_loglik(inst.params, ctx) - total_cond_loglik(inst.params, ctx0)) <= 1e-4);
  }
}

TEST_CASE("product structure") {
  std::mt19937_64 rng(6);
  for (int r = 0; r < 20; ++r) {
    auto inst = random_instance(rng, "hotb", 6);
    const auto ctx = LikContext::build(inst.data, inst.spec);
    const double once = total_cond_loglik(inst.params, ctx);

    double sum = 0.0;
    for (std::size_t i = 0; i < ctx.n; ++i) sum += subject_cond_loglik(i, inst.params, ctx);
    CHECK(sum == doctest::Approx(once).epsilon(1e-13));

    Dataset twice = inst.data;
    for (auto s : inst.data.subjects) {
      s.subject_id += "'";
      twice.subjects.push_back(s);
    }
    const auto ctx2 = LikContext::build(twice, inst.spec);
    CHECK(ctx2.events() == ctx.events());
    CHECK(total_cond_loglik(inst.params, ctx2) == doctest::Approx(2.0 * once).epsilon(1e-13));
  }
}

TEST_CASE("covariate-free invariances") {
  std::mt19937_64 rng(8);
  for (int r = 0; r < 20; ++r) {
    auto inst = random_instance(rng, "hotb");
    inst.params.log_phi = 0.0;
    std::fill(inst.params.beta.begin(), inst.params.beta.end(), 0.0);
    const auto ctx = LikContext::build(inst.data, inst.spec);
    const double ll = total_cond_loglik(inst.params, ctx);
    Dataset perm = inst.data;
    std::shuffle(perm.subjects.begin(), perm.subjects.end(), rng);
    std::vector<std::vector<double>> rows;
    for (const auto& s : perm.subjects) rows.push_back(s.covariates);
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t i = 0; i < rows.size(); ++i) perm.subjects[i].covariates = rows[i];
    double permuted = 0.0;
    const auto ctxp = LikContext::build(perm, inst.spec);
    for (std::size_t i = 0; i < ctxp.n; ++i) permuted += subject_cond_loglik(i, inst.params, ctxp);
    CHECK(permuted == doctest::Approx(ll).epsilon(1e-13));

    // phi = 1: the window stored in the spec is irrelevant
    auto other = inst.spec;
    other.window = BehaviorSpec{2, 4, 0.3};
    CHECK(total_cond_loglik(inst.params, LikContext::build(inst.data, other)) == doctest::Approx(ll).epsilon(1e-13));
  }
}

TEST_CASE("constant baseline is linear at the event times") {
  Dataset d;
  d.tau = 2.0;
  d.subjects = {{"a", {0.5, 1.9}, {}}, {"b", {1.5}, {}}};
  const auto spec = ModelSpec::from_name("b", 2.0);
  const auto ctx = LikContext::build(d, spec);
  ParamState p;
  p.log_phi = std::log(0.25);
  p.log_omega_tau = std::log(3.0);
  p.theta = ctx.constant_rate_theta(3.0);
  CHECK(p.theta == std::vector<double>{0.75, 1.5, 0.75});
  const auto os = ctx.omega_stars(p);
  // window (0.5, 2]: three quarters of the horizon
  CHECK(os[0] == doctest::Approx(3.0 - 0.75 * 3.0 * 0.75).epsilon(1e-15));
  CHECK(os[1] == doctest::Approx(3.0 - 0.75 * 3.0 * 0.25).epsilon(1e-15));
  const double want = std::log(0.25) + 2.0 * std::log(0.75) - os[0] - std::log(-std::expm1(-3.0));
  CHECK(subject_cond_loglik(0, p, ctx) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("single capture is phi-free under the classic window") {
  Dataset d;
  d.tau = 1.0;
  d.subjects = {{"a", {0.4}, {}}, {"b", {0.7}, {}}};
  const auto spec = ModelSpec::from_name("htb", 1.0);
  const auto ctx = LikContext::build(d, spec);
  ParamState p;
  p.theta = {0.3, 0.5};
  p.log_omega_tau = std::log(0.8);
  p.log_alpha = std::log(2.0);
  p.log_phi = 0.0;
  const double base = subject_cond_loglik(1, p, ctx);
  p.log_phi = std::log(3.0);
  CHECK(subject_cond_loglik(1, p, ctx) == base);
}

TEST_CASE("zero covariate column") {
  std::mt19937_64 rng(10);
  for (int r = 0; r < 20; ++r) {
    auto inst = random_instance(rng, "hotb");
    const auto ctx = LikContext::build(inst.data, inst.spec);
    const double ll = total_cond_loglik(inst.params, ctx);
    Dataset padded = inst.data;
    padded.covariate_names.push_back("zero");
    for (auto& s : padded.subjects) s.covariates.push_back(0.0);
    auto p = inst.params;
    p.beta.push_back(std::normal_distribution<double>(0.0, 3.0)(rng));
    CHECK(total_cond_loglik(p, LikContext::build(padded, inst.spec)) == ll);
  }
}

TEST_CASE("log barrier at observed capture times") {
  std::mt19937_64 rng(12);
  const auto inst = random_instance(rng, "hotb", 5, 3);
  const auto ctx = LikContext::build(inst.data, inst.spec);
  const std::size_t k = ctx.event_index[0];
  auto p = inst.params;
  double prev = total_cond_loglik(p, ctx);
  for (int step = 0; step < 6; ++step) {
    p.theta[k] *= 0.1;
    const double ll = total_cond_loglik(p, ctx);
    CHECK(ll < prev);
    prev = ll;
  }
  p.theta[k] = 0.0;
  CHECK(total_cond_loglik(p, ctx) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(subject_cond_loglik(0, p, ctx), NumericError);
}

TEST_CASE("ECCL hand value") {
  Dataset d;
  d.tau = 1.0;
  d.subjects = {{"a", {0.3, 0.6}, {}}};
  const auto spec = ModelSpec::from_name("htb", 1.0);
  const auto ctx = LikContext::build(d, spec);
  ParamState p;
  p.log_phi = std::log(0.5);
  p.log_alpha = std::log(2.0);
  p.theta = {0.4, 0.6};
  p.log_omega_tau = 0.0;
  const std::vector<double> rho{1.0};
  // Omega* = 1 + 0.5 (0.4 - 1) = 0.7
  const double want = std::log(0.5) + std::log(0.4) + std::log(0.6) - 0.7 - std::log(1.0 - std::exp(-1.0)) +
                      2.0 * std::log(2.0) - 2.0;
  CHECK(eccl_loglik(p, rho, ctx) == doctest::Approx(want).epsilon(1e-14));
  CHECK_THROWS_AS(eccl_loglik(p, std::vector<double>{0.0}, ctx), InputError);
  CHECK_THROWS_AS(eccl_loglik(p, std::vector<double>{-1.0}, ctx), InputError);
}

TEST_CASE("ECCL scaling") {
  std::mt19937_64 rng(13);
  for (int r = 0; r < 20; ++r) {
    const auto inst = random_instance(rng, "hotb");
    const auto ctx = LikContext::build(inst.data, inst.spec);
    const auto rho = random_rho(rng, ctx.n);
    const double c = 1.7;
    auto p = inst.params;
    auto rs = rho;
    for (auto& v : rs) v *= c;
    p.log_omega_tau -= std::log(c);
    for (auto& t : p.theta) t /= c;
    double f_shift = 0.0;
    for (std::size_t i = 0; i < ctx.n; ++i)
      f_shift += log_gamma_pdf(rs[i], p.alpha()) - log_gamma_pdf(rho[i], p.alpha());
    CHECK(eccl_loglik(p, rs, ctx) - eccl_loglik(inst.params, rho, ctx) == doctest::Approx(f_shift).epsilon(1e-10));
  }
}

TEST_CASE("helper A and B") {
  CHECK(helper_A(1.0, 1.0, std::log(2.0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(helper_A(1.0, 1.0, 0.0), NumericError);
  // e^{x} A^2 = A (1 + A)
  for (double x : {1e-3, 0.2, 3.0, 20.0}) {
    const double a = helper_A(1.0, 1.0, x);
    CHECK(std::exp(x) * a * a == doctest::Approx(a * (1.0 + a)).epsilon(1e-13));
  }

  Dataset d;
  d.tau = 1.0;
  d.subjects = {{"a", {0.4, 0.8}, {}}};
  const auto ctx = LikContext::build(d, ModelSpec::from_name("htb", 1.0));
  const std::vector<double> g{1.3}, r{0.7};
  const double omega = 0.9;
  CHECK(helper_B(0.3, g, r, omega, 0.4, ctx) ==
        doctest::Approx(0.7 * 1.3 * (1.0 + helper_A(1.3, 0.7, omega))).epsilon(1e-15));
  CHECK(helper_B(0.3, g, r, omega, 0.8, ctx) ==
        doctest::Approx(0.7 * 1.3 * (0.3 + helper_A(1.3, 0.7, omega))).epsilon(1e-15));

  std::mt19937_64 rng(14);
  const auto inst = random_instance(rng, "htb", 10, 4, 0);
  auto classic = inst.spec;
  classic.window = {};
  const auto c2 = LikContext::build(inst.data, classic);
  const auto rho = random_rho(rng, c2.n);
  const std::vector<double> ones(c2.n, 1.0);
  double prev = helper_B(0.4, ones, rho, 1.0, 0.0, c2);
  for (double t : c2.event_times) {
    const double b = helper_B(0.4, ones, rho, 1.0, t, c2);
    CHECK(b <= prev);
    prev = b;
  }
}

TEST_CASE("profile jumps satisfy the Nelson-Aalen form") {
  std::mt19937_64 rng(15);
  for (int r = 0; r < 20; ++r) {
    const auto inst = random_instance(rng, "hotb");
    const auto ctx = LikContext::build(inst.data, inst.spec);
    const auto rho = random_rho(rng, ctx.n);
    const auto gam = ctx.gammas(inst.params.beta);
    const auto ev = profile_eccl(ctx, inst.params.phi(), inst.params.omega_tau(), inst.params.beta, rho, false);
    double s = 0.0, total = 0.0;
    for (std::size_t k = 0; k < ctx.events(); ++k) {
      s += ctx.dN[k] / helper_B(inst.params.phi(), gam, rho, inst.params.omega_tau(), ctx.event_times[k], ctx);
      total += ev.theta[k];
    }
    CHECK(total == doctest::Approx(inst.params.omega_tau()).epsilon(1e-13));
    CHECK(ev.constraint_residual == doctest::Approx(s - inst.params.omega_tau()).epsilon(1e-12));
    for (std::size_t k = 0; k < ctx.events(); ++k) {
      const double b = helper_B(inst.params.phi(), gam, rho, inst.params.omega_tau(), ctx.event_times[k], ctx);
      CHECK(ev.theta[k] == doctest::Approx(inst.params.omega_tau() * ctx.dN[k] / b / s).epsilon(1e-12));
    }
    // The profile value is the ECCL at the profiled jumps without the frailty density.
    auto p = inst.params;
    p.theta = ev.theta;
    double dens = 0.0;
    for (std::size_t i = 0; i < ctx.n; ++i) dens += log_gamma_pdf(rho[i], p.alpha());
    CHECK(ev.value == doctest::Approx(eccl_loglik(p, rho, ctx) - dens).epsilon(1e-12));
  }
}

TEST_CASE("score matches finite differences of the profile") {
  std::mt19937_64 rng(16);
  const char* models[] = {"hotb", "hotb", "htb", "hob", "otb", "hb"};
  for (int r = 0; r < 30; ++r) {
    const auto inst = random_instance(rng, models[r % 6]);
    const auto ctx = LikContext::build(inst.data, inst.spec);
    const auto rho = random_rho(rng, ctx.n);
    const auto& p = inst.params;
    const auto g = score_vector(p, rho, ctx);
    REQUIRE(g.size() == 2 + ctx.p);
    std::vector<double> x{p.phi(), p.omega_tau()};
    x.insert(x.end(), p.beta.begin(), p.beta.end());
    auto value = [&](const std::vector<double>& v) {
      return profile_eccl(ctx, v[0], v[1], std::span<const double>(v).subspan(2), rho, false).value;
    };
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
      auto up = x, dn = x;
      up[j] += h;
      dn[j] -= h;
      const double fd = (value(up) - value(dn)) / (2.0 * h);
      INFO("model " << inst.spec.name() << " coordinate " << j << " analytic " << g[j] << " fd " << fd);
      CHECK(std::abs(g[j] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
  std::mt19937_64 rng2(17);
  const auto inst = random_instance(rng2, "htb");
  const auto ctx = LikContext::build(inst.data, inst.spec);
  CHECK(score_vector(inst.params, random_rho(rng2, ctx.n), ctx).size() == 2);
}
