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

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "msd/diagnostics.hpp"
#include "oracle.hpp"

using namespace msd;

namespace {

PointCloud cloud1(std::vector<double> xs) { return PointCloud(1, std::move(xs)); }

std::size_t count(const std::vector<std::uint8_t>& m) { return static_cast<std::size_t>(std::count(m.begin(), m.end(), 1)); }

PointCloud dense_unit(std::size_t n) {
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  return cloud1(xs);
}

bool subset(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("interior support") {
  SUBCASE("threshold above the peak") {
    const auto m = interior_support(cloud1({0.0}), KdeConfig::fixed(1.0), 0.2, 0.41);
    CHECK(count(m.member[0]) == 0);
    const auto low = interior_support(cloud1({0.0}), KdeConfig::fixed(1.0), 0.2, 0.39);
    CHECK(count(low.member[0]) > 0);
  }
  SUBCASE("erosion of a dense interval") {
    const double delta = 0.1;
    GridSpec grid;
    grid.spacing = 0.005;
    const auto m = interior_support(dense_unit(2000), KdeConfig::fixed(0.002), delta, 1e-3, grid);
    double lo = 1e9, hi = -1e9;
    for (std::size_t i = 0; i < m.lattice.size(); ++i)
      if (m.member[0][i]) {
        lo = std::min(lo, m.lattice.point(i)[0]);
        hi = std::max(hi, m.lattice.point(i)[0]);
      }
    CHECK(lo == doctest::Approx(delta).epsilon(0.1));
    CHECK(hi == doctest::Approx(1.0 - delta).epsilon(0.02));
  }
  SUBCASE("monotone in c and delta") {
    const auto pts = sample(TargetSpec::mvnormal({0, 0}, {1, 0.3, 0.3, 2}), 300, 61);
    GridSpec grid;
    grid.spacing = 0.1;
    grid.lo = Point{-5, -6};
    grid.hi = Point{5, 6};
    const auto cfg = KdeConfig::silverman();
    const auto c1 = interior_support(pts, cfg, 0.3, 1e-3, grid), c2 = interior_support(pts, cfg, 0.3, 1e-2, grid);
    CHECK(subset(c2.member[0], c1.member[0]));
    const auto d1 = interior_support(pts, cfg, 0.2, 1e-3, grid), d2 = interior_support(pts, cfg, 0.6, 1e-3, grid);
    CHECK(subset(d2.member[0], d1.member[0]));
    CHECK(count(d2.member[0]) < count(d1.member[0]));
  }
  SUBCASE("membership implies density above c over the ball") {
    const auto pts = cloud1({-1.0, 0.0, 0.2, 1.5});
    const auto cfg = KdeConfig::fixed(0.5);
    const double delta = 0.3, c = 0.05;
    const auto m = interior_support(pts, cfg, delta, c);
    const std::vector<double> w(4, 0.25);
    for (std::size_t i = 0; i < m.lattice.size(); ++i) {
      if (!m.member[0][i]) continue;
      const double x = m.lattice.point(i)[0];
      for (double y = x - delta; y <= x + delta; y += m.lattice.spacing * 0.999)
        CHECK(oracle::kde1({-1.0, 0.0, 0.2, 1.5}, w, 0.5, y) > c * 0.99);
    }
  }
  SUBCASE("coarse grid is rejected") {
    GridSpec grid;
    grid.spacing = 0.2;
    CHECK_THROWS_AS(interior_support(cloud1({0.0}), KdeConfig::fixed(1.0), 0.3, 1e-3, grid), ConfigError);
  }
}

TEST_CASE("disjointness") {
  const auto left = sample(TargetSpec::mvnormal({-10, 0}, {1, 0, 0, 1}), 100, 62);
  const auto right = sample(TargetSpec::mvnormal({10, 0}, {1, 0, 0, 1}), 100, 63);
  const DecompositionState apart{ParticleSet({left, right}), WeightVector::equal(2), 0, 0};
  const auto r = disjointness_check(apart, 0.25, 1e-4, KdeConfig::fixed(0.5));
  CHECK(r.disjoint);
  CHECK(r.overlap_fraction == 0.0);

  const DecompositionState same{ParticleSet({left, left}), WeightVector::equal(2), 0, 0};
  const auto s = disjointness_check(same, 0.25, 1e-4, KdeConfig::fixed(0.5));
  CHECK_FALSE(s.disjoint);
  CHECK(s.overlap_fraction == 1.0);
}

TEST_CASE("convex in pairs") {
  SUBCASE("half-space split holds") {
    std::vector<double> a, b;
    Rng rng(64);
    for (int i = 0; i < 200; ++i) {
      a.insert(a.end(), {-4.0 + 3.0 * rng.uniform(), -2.0 + 4.0 * rng.uniform()});
      b.insert(b.end(), {1.0 + 3.0 * rng.uniform(), -2.0 + 4.0 * rng.uniform()});
    }
    const DecompositionState s{ParticleSet({PointCloud(2, a), PointCloud(2, b)}), WeightVector::equal(2), 0, 0};
    CHECK(convex_in_pairs_check(s, 0.3, 1e-3, KdeConfig::fixed(0.3), 200, 1).holds);
  }
  SUBCASE("bulk inside the tail fails") {
    std::vector<double> bulk, tail;
    Rng rng(65);
    for (int i = 0; i < 200; ++i) {
      bulk.push_back(330.0 + 5.0 * rng.normal());
      tail.push_back(i % 4 == 0 ? 121.0 + 3.0 * rng.normal() : 1800.0 + 40.0 * rng.normal());
    }
    const DecompositionState s{ParticleSet({cloud1(tail), cloud1(bulk)}), WeightVector({0.4, 0.6}), 0, 0};
    const auto r = convex_in_pairs_check(s, 2.0, 1e-4, KdeConfig::fixed(3.0), 200, 2);
    CHECK_FALSE(r.holds);
    REQUIRE_FALSE(r.violations.empty());
    CHECK(r.violations.front().group == 0);
    CHECK(r.violations.front().intruder == 1);
  }
  SUBCASE("single group is vacuous") {
    const DecompositionState s{ParticleSet({cloud1({0.0, 1.0, 2.0})}), WeightVector({1.0}), 0, 0};
    CHECK(convex_in_pairs_check(s, 0.2, 1e-4, KdeConfig::fixed(0.5), 50, 3).holds);
  }
}

TEST_CASE("win rate curve") {
  const std::vector<double> opp{1.0, 3.0};
  CHECK(win_rate_curve(std::vector<double>{2.0, 2.0}, std::vector<double>{2.0})[0] == 0.5);
  CHECK(win_rate_curve(opp, std::vector<double>{3.0})[0] == doctest::Approx(0.625));
  const std::vector<double> grid{0.5, 1.0, 2.0, 4.0, 8.0};
  const auto w = win_rate_curve(opp, grid);
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(w[i] > 0.0);
    CHECK(w[i] < 1.0);
    if (i > 0) CHECK(w[i] > w[i - 1]);
  }
  CHECK_THROWS_AS(win_rate_curve(std::vector<double>{-1.0}, grid), DomainError);

  // a symmetric sample against itself averages to one half
  std::vector<double> sym;
  for (int i = 1; i <= 50; ++i) sym.push_back(10.0 + i);
  const auto own = win_rate_curve(sym, sym);
  double mean = 0.0;
  for (double v : own) mean += v;
  mean /= static_cast<double>(own.size());
  CHECK(std::abs(mean - 0.5) <= 1.0 / (2.0 * static_cast<double>(sym.size())));
}

TEST_CASE("baselines") {
  const auto s = baseline_parallel_slices(cloud1({3, 1, 4, 2}), 2, 0);
  CHECK(s.particles.group(0).raw() == std::vector<double>{1, 2});
  CHECK(s.particles.group(1).raw() == std::vector<double>{3, 4});
  CHECK(baseline_parallel_slices(cloud1({3, 1, 4, 2}), 1, 0).particles.group(0).raw() == std::vector<double>{1, 2, 3, 4});

  const auto uni = sample(TargetSpec::smoothed_uniform(10.0, 30.0), 20000, 66);
  CHECK(quantile_boundary(uni, 0.5) == doctest::Approx(20.0).epsilon(0.01));

  const auto tail = baseline_quantile_split(uni, 0.95);
  CHECK(tail.weights[0] == 0.95);
  CHECK(tail.weights[1] == doctest::Approx(0.05).epsilon(1e-14));
  const double cut = quantile_boundary(uni, 0.95);
  for (double v : tail.particles.group(1).raw()) CHECK(v >= cut);

  const auto mixed = TargetSpec::mixture({{0.1, TargetSpec::lognormal(4.8, 0.05)},
                                          {0.6, TargetSpec::lognormal(5.8, 0.05)},
                                          {0.3, TargetSpec::lognormal(7.5, 0.05)}});
  CHECK(quantile_boundary(sample(mixed, 20000, 67), 0.4) == doctest::Approx(347.0).epsilon(0.05));

  const auto gl = baseline_grand_league(cloud1({1, 2, 3}));
  CHECK(gl.particles.groups() == 1);
  CHECK(gl.weights.values() == std::vector<double>{1.0});
}

TEST_CASE("brute force oracle") {
  const double a = 1.05;
  const std::vector<Atom> atoms{{a - 1, 0.25}, {a, 0.5}, {a + 1, 0.25}};
  const auto best = brute_force_discrete(atoms, 2, {0.5, 0.5}, KernelSpec::elo(), 1.0 / 16.0);
  const bool first_is_bulk = best.components[0][1] == 1.0;
  const auto& bulk = best.components[first_is_bulk ? 0 : 1];
  const auto& tail = best.components[first_is_bulk ? 1 : 0];
  CHECK(bulk == std::vector<double>{0.0, 1.0, 0.0});
  CHECK(tail == std::vector<double>{0.5, 0.0, 0.5});
  CHECK(std::abs(best.objective - 1.0 / (16.0 * a * a)) <= 1e-12);

  const double adjacent = discrete_objective(atoms, {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}}, {0.5, 0.5}, KernelSpec::elo());
  CHECK(adjacent == doctest::Approx(0.25 * (1.0 / (4 * (2 * a - 1) * (2 * a - 1)) + 1.0 / (4 * (2 * a + 1) * (2 * a + 1)))));
  CHECK(best.objective < adjacent);

  const auto one = brute_force_discrete(atoms, 1, {1.0}, KernelSpec::elo(), 1.0 / 16.0);
  CHECK(one.components[0] == std::vector<double>{0.25, 0.5, 0.25});

  const std::vector<Atom> even{{0.0, 0.25}, {1.0, 0.5}, {2.0, 0.25}};
  const auto var = brute_force_discrete(even, 2, {0.5, 0.5}, KernelSpec::variance({1}, 1), 1.0 / 16.0);
  // adjacent atoms share a group: neither group mixes the two end atoms
  for (const auto& comp : var.components) CHECK_FALSE((comp[0] > 0.0 && comp[2] > 0.0));

  CHECK(elo_bulk_tail_crossover() > 1.05);
  CHECK_THROWS_AS(brute_force_discrete(atoms, 2, {0.5, 0.5}, KernelSpec::elo(), 0.3), ConfigError);
}

TEST_CASE("default delta") {
  const DecompositionState s{ParticleSet({cloud1({0.0, 2.0}), cloud1({4.0, 6.0})}), WeightVector::equal(2), 0, 0};
  // pooled sd of {0, 2, 4, 6} is sqrt(5)
  CHECK(default_delta(s) == doctest::Approx(0.1 * std::sqrt(5.0)));
}
