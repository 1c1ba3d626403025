// Copyright 2026 The msdecomp Authors
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

#include <cmath>
#include <numeric>

#include "doctest.h"
#include "msd/wflow.hpp"

using namespace msd;

namespace {

PointCloud cloud1(std::vector<double> xs) { return PointCloud(1, std::move(xs)); }

DecompositionState state_of(std::vector<PointCloud> groups, std::vector<double> p) {
  return DecompositionState{ParticleSet(std::move(groups)), WeightVector(std::move(p)), 0, 0};
}

FlowConfig fixed_h(double h, double alpha = 1.0) {
  FlowConfig c;
  c.alpha = alpha;
  c.kde = KdeConfig::fixed(h);
  return c;
}

}  // namespace

TEST_CASE("project_simplex_tangent") {
  CHECK(project_simplex_tangent(std::vector<double>{1, 1}) == std::vector<double>{0, 0});
  CHECK(project_simplex_tangent(std::vector<double>{1, 0}) == std::vector<double>{0.5, -0.5});
  Rng rng(41);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> v(4);
    for (double& x : v) x = rng.normal();
    const auto p = project_simplex_tangent(v);
    const auto pp = project_simplex_tangent(p);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0)) <= 1e-15);
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(pp[k] - p[k]) <= 1e-15);
  }
}

TEST_CASE("fixed velocity: three-particle golden case") {
  // K = 1, zero loss, h = 1, standard normal target
  const auto s = state_of({cloud1({-2.0, 0.3, 2.5})}, {1.0});
  const auto v = velocity_fixed(s, KernelSpec::zero(), TargetSpec::gaussian1d(0, 1), fixed_h(1.0));
  CHECK(v.kl == doctest::Approx(0.7254600125057569).epsilon(1e-12));
  CHECK(v.lambda_denominator == doctest::Approx(2.967825719165326).epsilon(1e-12));
  CHECK(v.lambda == doctest::Approx(0.24444158153255235).epsilon(1e-12));
  CHECK(v.phi[0][0][0] == doctest::Approx(0.4515697206834478).epsilon(1e-12));
  CHECK(v.phi[0][1][0] == doctest::Approx(-0.0801425493567022).epsilon(1e-12));
  CHECK(v.phi[0][2][0] == doctest::Approx(-0.567150542211747).epsilon(1e-12));
}

TEST_CASE("fixed velocity: stationary point") {
  // one particle per group at its own mean, KDE matched to the target
  const auto s = state_of({cloud1({0.0}), cloud1({0.0})}, {0.5, 0.5});
  const auto v = velocity_fixed(s, KernelSpec::variance({1}, 1), TargetSpec::gaussian1d(0, 1), fixed_h(1.0));
  CHECK(v.lambda == 0.0);
  CHECK(v.phi[0][0][0] == 0.0);
  CHECK(v.phi[1][0][0] == 0.0);
}

TEST_CASE("lambda is affine in alpha") {
  const auto target = TargetSpec::mvnormal({0.0, 0.0}, {16.0, 14.4, 14.4, 36.0});
  auto s = init_from_target(target, 2, 40, 42);
  rescale_about_mean(s, 0.5);
  const auto kern = KernelSpec::variance_diagonal({1.0, 1.0});
  for (FlowMode mode : {FlowMode::fixed_weights, FlowMode::dynamic_weights}) {
    FlowConfig c;
    c.mode = mode;
    auto vel = [&](double a) {
      c.alpha = a;
      return mode == FlowMode::fixed_weights ? velocity_fixed(s, kern, target, c) : velocity_dynamic(s, kern, target, c);
    };
    const auto v1 = vel(1.0), v2 = vel(2.0), v4 = vel(4.0);
    const double slope = v1.kl / v1.lambda_denominator;
    REQUIRE(v1.kl > 0.0);
    CHECK((v2.lambda - v1.lambda) == doctest::Approx(slope).epsilon(1e-10));
    CHECK((v4.lambda - v2.lambda) == doctest::Approx(2.0 * (v2.lambda - v1.lambda)).epsilon(1e-10));
  }
}

TEST_CASE("velocity decomposition identity") {
  const auto target = TargetSpec::mvnormal({0.0, 0.0}, {16.0, 14.4, 14.4, 36.0});
  auto s = init_from_target(target, 3, 30, 43, std::vector<double>{0.2, 0.3, 0.5});
  rescale_about_mean(s, 0.6);
  const auto kern = KernelSpec::variance_diagonal({1.0, 1.0});
  FlowConfig c;
  const auto v = velocity_fixed(s, kern, target, c);
  const auto pooled = pooled_samples(s);
  const Kde kde(pooled.points, pooled.weights, c.kde);
  for (std::size_t k = 0; k < 3; ++k) {
    const PointCloud& g = s.particles.group(k);
    const double p = s.weights[k];
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Point gl = grad_L_at(kern, g, g[i]);
      const Point sm = kde.score(g[i]);
      const Point sp = target.score(g[i]);
      for (std::size_t j = 0; j < 2; ++j) {
        const double lhs = v.phi[k][i][j] + p * gl[j];
        const double rhs = -v.lambda * p * (sm[j] - sp[j]);
        CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(rhs)));
      }
    }
  }
}

TEST_CASE("dynamic velocity") {
  const auto target = TargetSpec::gaussian1d(0.0, 1.0);
  const auto base = init_from_target(target, 1, 50, 44);
  const auto twin = state_of({base.particles.group(0), base.particles.group(0)}, {0.5, 0.5});
  FlowConfig c;
  c.mode = FlowMode::dynamic_weights;
  c.theta = 1.0;
  for (double theta : {1.0, 1e6}) {
    c.theta = theta;
    const auto v = velocity_dynamic(twin, KernelSpec::variance({1}, 1), target, c);
    CHECK(v.weight_velocity[0] == 0.0);
    CHECK(v.weight_velocity[1] == 0.0);
  }

  // hand chain: L = (0.1, 0.3), theta = beta = 1, p = (0.5, 0.5), lambda = 0
  const std::vector<double> raw{0.1 - 1.0 / 0.25, 0.3 - 1.0 / 0.25};
  CHECK(raw[0] == doctest::Approx(-3.9));
  const auto pv = project_simplex_tangent(raw);
  CHECK(-pv[0] == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(-pv[1] == doctest::Approx(-0.1).epsilon(1e-14));

  // the library assembles the same chain
  auto s = init_from_target(TargetSpec::lognormal(4.0, 0.5), 2, 30, 45);
  c.theta = 1e-4;
  const auto v = velocity_dynamic(s, KernelSpec::elo(), TargetSpec::lognormal(4.0, 0.5), c);
  const auto kw = kl_grad_weights(s, TargetSpec::lognormal(4.0, 0.5), c.kde);
  std::vector<double> expect(2);
  for (std::size_t k = 0; k < 2; ++k)
    expect[k] = -(v.group_loss[k] - c.theta * c.beta / std::pow(s.weights[k], c.beta + 1.0) + v.lambda * kw[k]);
  const auto pe = project_simplex_tangent(expect);
  CHECK(v.weight_velocity[0] == doctest::Approx(pe[0]).epsilon(1e-12));
  CHECK(v.weight_velocity[0] + v.weight_velocity[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("steps") {
  auto s = state_of({cloud1({1.0})}, {1.0});
  VelocityField v;
  v.phi = {cloud1({-0.5})};
  CHECK(step_fixed(s, v, 0.1).particles.group(0)[0][0] == doctest::Approx(0.95));
  CHECK(step_fixed(s, v, 0.1).iteration == 1);
  v.phi = {cloud1({0.0})};
  CHECK(step_fixed(s, v, 0.1).particles == s.particles);

  s = state_of({cloud1({0.1})}, {1.0});
  v.phi = {cloud1({-3.0})};
  CHECK(step_fixed(s, v, 0.1, PositivityGuard::reflect).particles.group(0)[0][0] == doctest::Approx(0.2));
  CHECK(step_fixed(s, v, 0.1, PositivityGuard::log_domain).particles.group(0)[0][0] ==
        doctest::Approx(0.1 * std::exp(-3.0)));

  auto two = state_of({cloud1({1.0}), cloud1({2.0})}, {0.5, 0.5});
  VelocityField w;
  w.phi = {cloud1({0.0}), cloud1({0.0})};
  w.weight_velocity = {0.0, 0.0};
  CHECK(step_dynamic(two, w, 0.1, 0.1, 1e-3).weights.values() == std::vector<double>{0.5, 0.5});
  w.weight_velocity = {0.1, -0.1};
  const auto n1 = step_dynamic(two, w, 0.1, 0.1, 1e-3).weights.values();
  CHECK(n1[0] == doctest::Approx(0.51).epsilon(1e-14));
  CHECK(n1[1] == doctest::Approx(0.49).epsilon(1e-14));

  auto edge = state_of({cloud1({1.0}), cloud1({2.0})}, {0.0011, 0.9989});
  w.weight_velocity = {-0.5, 0.5};
  const auto n2 = step_dynamic(edge, w, 0.1, 0.01, 1e-3).weights.values();
  CHECK(std::abs(n2[0] - 1e-3) <= 1e-12);
  CHECK(std::abs(n2[1] - (1.0 - 1e-3)) <= 1e-12);
}

TEST_CASE("objective") {
  const auto single = state_of({cloud1({5.0}), cloud1({9.0})}, {0.5, 0.5});
  CHECK(objective(single, KernelSpec::elo(), FlowMode::fixed_weights, 1, 1) == 0.0);
  CHECK(objective(single, KernelSpec::elo(), FlowMode::dynamic_weights, 1, 1) == doctest::Approx(4.0));
  const auto split = state_of({cloud1({0, 2}), cloud1({10, 12})}, {0.5, 0.5});
  CHECK(objective(split, KernelSpec::variance({1}, 1), FlowMode::fixed_weights, 1, 1) == doctest::Approx(2.0));
  const auto base = init_from_target(TargetSpec::gaussian1d(0, 1), 1, 40, 46);
  const double l = loss_estimate(KernelSpec::variance({1}, 1), base.particles.group(0));
  for (auto p : {std::vector<double>{0.5, 0.5}, std::vector<double>{0.1, 0.9}}) {
    const auto same = state_of({base.particles.group(0), base.particles.group(0)}, p);
    CHECK(objective(same, KernelSpec::variance({1}, 1), FlowMode::fixed_weights, 1, 1) == doctest::Approx(l).epsilon(1e-14));
  }
}

TEST_CASE("config validation") {
  FlowConfig c;
  c.eta = -1.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("eta"), ConfigError);
  c = FlowConfig{};
  c.mode = FlowMode::dynamic_weights;
  c.theta = 0.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("theta"), ConfigError);
  c = FlowConfig{};
  c.alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("runs") {
  const auto target = TargetSpec::mvnormal({0.0, 0.0}, {16.0, 14.4, 14.4, 36.0});
  const auto kern = KernelSpec::variance_diagonal({1.0, 1.0});
  FlowConfig c;
  c.iterations = 0;
  const auto r0 = run_fixed(target, kern, 2, 30, {0.5, 0.5}, c, 47);
  CHECK(r0.length() == 1);
  CHECK(r0.final_state == init_from_target(target, 2, 30, 47));

  c.iterations = 15;
  const auto a = run_fixed(target, kern, 2, 30, {0.5, 0.5}, c, 48);
  const auto b = run_fixed(target, kern, 2, 30, {0.5, 0.5}, c, 48);
  CHECK(a.length() == 16);
  CHECK(a.kl == b.kl);
  CHECK(a.objective == b.objective);
  CHECK(a.final_state == b.final_state);
  CHECK(a.eta > 0.0);

  c.mode = FlowMode::dynamic_weights;
  const auto k1 = run_dynamic(target, kern, 1, 20, c, 49);
  for (const auto& w : k1.weights) CHECK(w == std::vector<double>{1.0});
}

TEST_CASE("dynamic runs keep the simplex") {
  const auto target = TargetSpec::mixture({{0.3, TargetSpec::lognormal(4.0, 0.1)}, {0.7, TargetSpec::lognormal(4.6, 0.15)}});
  FlowConfig c;
  c.mode = FlowMode::dynamic_weights;
  c.eta = 1.0;
  c.eta2 = 200.0;  // large on purpose, so the floor is exercised
  c.iterations = 60;
  const auto r = run_dynamic(target, KernelSpec::elo(), 3, 30, c, 50);
  for (const auto& w : r.weights) {
    CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) <= 1e-12);
    CHECK(*std::min_element(w.begin(), w.end()) >= c.p_floor);
  }
}

TEST_CASE("numerical failure truncates the record") {
  const auto target = TargetSpec::gaussian1d(0.0, 1.0);
  FlowConfig c;
  c.eta = 1e6;  // blows up within a few steps
  c.iterations = 50;
  c.kde = KdeConfig::fixed(0.3);
  auto s = init_from_target(target, 2, 20, 51);
  rescale_about_mean(s, 3.0);
  const auto r = run_flow(s, target, KernelSpec::variance({1}, 1), c);
  REQUIRE(r.failed_at.has_value());
  CHECK(r.length() == *r.failed_at);
  CHECK_FALSE(r.failure.empty());
}
