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

#include "doctest.h"
#include "msd/kernels.hpp"
#include "oracle.hpp"

using namespace msd;

namespace {

double d1(double v) { return v; }

std::vector<double> v1(double a) { return {a}; }

PointCloud cloud1(std::initializer_list<double> xs) { return PointCloud(1, std::vector<double>(xs)); }

}  // namespace

TEST_CASE("kernel values") {
  const auto elo = KernelSpec::elo();
  for (double x : {0.1, 1.0, 7.5, 1500.0}) CHECK(kernel_eval(elo, v1(x), v1(x)) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(kernel_eval(elo, v1(1), v1(3)) == doctest::Approx(0.0625).epsilon(1e-15));
  CHECK(kernel_eval(elo, v1(1), v1(3)) == doctest::Approx(oracle::elo(1, 3)).epsilon(1e-14));
  CHECK(kernel_eval(KernelSpec::variance({1, 0, 0, 1}, 2), std::vector<double>{0, 0}, std::vector<double>{1, 1}) ==
        doctest::Approx(2.0));
  CHECK_THROWS_AS(kernel_eval(elo, v1(0.0), v1(1.0)), DomainError);
  CHECK_THROWS_AS(kernel_eval(elo, v1(-1.0), v1(1.0)), DomainError);
  CHECK_THROWS_AS(KernelSpec::variance({1, 2, 3, 1}, 2), ConfigError);
}

TEST_CASE("kernel gradients") {
  const auto elo = KernelSpec::elo();
  auto [g1, g2] = kernel_grad(elo, v1(1), v1(1));
  CHECK(g1[0] == 0.0);
  CHECK(g2[0] == 0.0);
  std::tie(g1, g2) = kernel_grad(elo, v1(1), v1(3));
  CHECK(g1[0] == doctest::Approx(-0.09375).epsilon(1e-15));
  CHECK(g2[0] == doctest::Approx((3.0 - 1.0) / 64.0).epsilon(1e-15));
  std::tie(g1, g2) = kernel_grad(KernelSpec::variance({1}, 1), v1(0), v1(2));
  CHECK(g1[0] == doctest::Approx(-4.0));
  CHECK(g2[0] == doctest::Approx(4.0));
}

TEST_CASE("symmetry and boundedness on random pairs") {
  Rng rng(17);
  const auto elo = KernelSpec::elo();
  const auto var = KernelSpec::variance({2.0, 0.5, 0.5, 1.0}, 2);
  for (int i = 0; i < 1000; ++i) {
    const double x = 0.01 + 100.0 * rng.uniform(), y = 0.01 + 100.0 * rng.uniform();
    const double e = kernel_eval(elo, v1(x), v1(y));
    CHECK(std::abs(e - kernel_eval(elo, v1(y), v1(x))) <= 1e-14);
    CHECK(std::abs(e) <= 0.25);
    const std::vector<double> a{rng.normal(), rng.normal()}, b{rng.normal(), rng.normal()};
    CHECK(std::abs(kernel_eval(var, a, b) - kernel_eval(var, b, a)) <= 1e-14);
  }
}

TEST_CASE("kernel_grad matches finite differences") {
  Rng rng(18);
  const auto elo = KernelSpec::elo();
  const auto var = KernelSpec::variance({1.0, 0.3, 0.3, -1.0}, 2);
  for (int i = 0; i < 100; ++i) {
    const std::vector<double> x{0.5 + 50.0 * rng.uniform()}, y{0.5 + 50.0 * rng.uniform()};
    const double h = 1e-5 * (1.0 + std::abs(x[0]) + std::abs(y[0]));
    const auto [g1, g2] = kernel_grad(elo, x, y);
    const auto f1 = oracle::fd_gradient([&](const std::vector<double>& p) { return kernel_eval(elo, p, y); }, x, h);
    const auto f2 = oracle::fd_gradient([&](const std::vector<double>& p) { return kernel_eval(elo, x, p); }, y, h);
    CHECK(oracle::rel_err(g1, f1) <= 1e-6);
    CHECK(oracle::rel_err(g2, f2) <= 1e-6);

    const std::vector<double> a{3 * rng.normal(), 3 * rng.normal()}, b{3 * rng.normal(), 3 * rng.normal()};
    const auto [v1g, v2g] = kernel_grad(var, a, b);
    const auto fa = oracle::fd_gradient([&](const std::vector<double>& p) { return kernel_eval(var, p, b); }, a, 1e-5);
    const auto fb = oracle::fd_gradient([&](const std::vector<double>& p) { return kernel_eval(var, a, p); }, b, 1e-5);
    CHECK(oracle::rel_err(v1g, fa) <= 1e-6);
    CHECK(oracle::rel_err(v2g, fb) <= 1e-6);
  }
}

TEST_CASE("loss_estimate") {
  CHECK(loss_estimate(KernelSpec::elo(), cloud1({1, 1})) == 0.0);
  CHECK(loss_estimate(KernelSpec::elo(), cloud1({1, 3})) == doctest::Approx(0.03125).epsilon(1e-15));
  CHECK(loss_estimate(KernelSpec::variance({1}, 1), cloud1({0, 2})) == doctest::Approx(2.0));
  const std::vector<double> xs{12.0, 55.0, 80.5, 140.0, 311.0};
  CHECK(loss_estimate(KernelSpec::elo(), PointCloud(1, xs)) ==
        doctest::Approx(oracle::vstat(oracle::elo, xs)).epsilon(1e-13));
}

TEST_CASE("grad_L_at") {
  const auto var = KernelSpec::variance({1}, 1);
  CHECK(grad_L_at(var, cloud1({0, 2}), v1(0))[0] == doctest::Approx(-4.0));
  CHECK(grad_L_at(var, cloud1({1.7}), v1(1.7))[0] == doctest::Approx(0.0));
  CHECK(grad_L_at(KernelSpec::elo(), cloud1({1}), v1(1))[0] == doctest::Approx(0.0));

  const PointCloud pts = cloud1({0.3, 1.1, 2.0, -0.7});
  const PointCloud field = grad_L_field(var, pts);
  for (std::size_t i = 0; i < pts.size(); ++i)
    CHECK(field[i][0] == doctest::Approx(grad_L_at(var, pts, pts[i])[0]).epsilon(1e-12));
}

TEST_CASE("chain identity on random 5-particle sets") {
  Rng rng(19);
  const auto check = [&](const KernelSpec& kern, std::size_t d, bool positive) {
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> raw(5 * d);
      for (double& v : raw) v = positive ? 1.0 + 20.0 * rng.uniform() : 2.0 * rng.normal();
      const PointCloud pts(d, raw);
      const PointCloud field = grad_L_field(kern, pts);
      for (std::size_t i = 0; i < 5; ++i) {
        std::vector<double> xi(pts[i].begin(), pts[i].end());
        const auto f = [&](const std::vector<double>& p) {
          PointCloud moved = pts;
          for (std::size_t j = 0; j < d; ++j) moved[i][j] = p[j];
          return loss_estimate(kern, moved);
        };
        const auto fd = oracle::fd_gradient(f, xi, 1e-5 * (1.0 + std::abs(xi[0])));
        std::vector<double> expect(d), at(d);
        const Point g = grad_L_at(kern, pts, pts[i]);
        for (std::size_t j = 0; j < d; ++j) {
          expect[j] = g[j] / 5.0;
          at[j] = field[i][j] / 5.0;
        }
        CHECK(oracle::rel_err(expect, fd) <= 1e-6);
        CHECK(oracle::rel_err(at, fd) <= 1e-6);
      }
    }
  };
  check(KernelSpec::elo(), 1, true);
  check(KernelSpec::variance({1.0, 0.0, 0.0, -1.0}, 2), 2, false);
  check(KernelSpec::variance({2.0, 0.4, 0.4, 1.0}, 2), 2, false);
  (void)d1;
}
