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
#include "msd/euclid.hpp"

using namespace msd;
using namespace msd::euclid;

namespace {

/// f = c * x^2 / 2 (c = 0 gives f = 0), g = x^2 / 2 in one dimension.
Problem scalar_quad(double c) {
  Problem p;
  p.name = "scalar";
  p.dim = 1;
  p.f = [c](PointView x) { return 0.5 * c * x[0] * x[0]; };
  p.grad_f = [c](PointView x) { return Point{c * x[0]}; };
  p.g = [](PointView x) { return 0.5 * x[0] * x[0]; };
  p.grad_g = [](PointView x) { return Point{x[0]}; };
  p.x0 = {2.0};
  return p;
}

/// f = x1, g = x2^2 / 2.
Problem linear_over_parabola() {
  Problem p;
  p.name = "lin";
  p.dim = 2;
  p.f = [](PointView x) { return x[0]; };
  p.grad_f = [](PointView) { return Point{1.0, 0.0}; };
  p.g = [](PointView x) { return 0.5 * x[1] * x[1]; };
  p.grad_g = [](PointView x) { return Point{0.0, x[1]}; };
  p.x0 = {0.0, 1.0};
  return p;
}

FlowConfig cfg(double alpha, double tau, Scheme s = Scheme::rk4, LambdaVariant v = LambdaVariant::equality) {
  FlowConfig c;
  c.alpha = alpha;
  c.tau = tau;
  c.scheme = s;
  c.variant = v;
  return c;
}

}  // namespace

TEST_CASE("lambda") {
  CHECK(lambda(scalar_quad(0), std::vector<double>{2.0}, 1.0, 1e-12) == doctest::Approx(0.5));
  CHECK(lambda(scalar_quad(1), std::vector<double>{1.0}, 1.0, 1e-12) == doctest::Approx(-0.5));
  CHECK(lambda(scalar_quad(1), std::vector<double>{1.0}, 1.0, 1e-12, LambdaVariant::positive_part) == 0.0);
  // feasible point with grad f orthogonal to grad g
  CHECK(lambda(linear_over_parabola(), std::vector<double>{3.0, 0.0}, 1.0, 1e-12) == 0.0);

  Problem flat = scalar_quad(0);
  flat.g = [](PointView) { return 1.0; };
  flat.grad_g = [](PointView) { return Point{0.0}; };
  CHECK_THROWS_AS(lambda(flat, std::vector<double>{1.0}, 1.0, 1e-12), DomainError);
}

TEST_CASE("single step") {
  CHECK(step(scalar_quad(0), std::vector<double>{2.0}, cfg(1.0, 0.1))[0] == doctest::Approx(1.9));
  const Point x = step(linear_over_parabola(), std::vector<double>{0.0, 1.0}, cfg(2.0, 0.1));
  CHECK(x[0] == doctest::Approx(-0.1));
  CHECK(x[1] == doctest::Approx(0.9));
  CHECK(step(scalar_quad(0), std::vector<double>{0.0}, cfg(1.0, 0.1))[0] == 0.0);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(cfg(1.0, 1.0).validate(), ConfigError);
  CHECK_THROWS_AS(cfg(0.0, 0.1).validate(), ConfigError);
  CHECK_THROWS_AS(cfg(1.0, -0.1).validate(), ConfigError);
  CHECK_NOTHROW(cfg(5.0, 0.1).validate());
}

TEST_CASE("exponential constraint decay") {
  const auto traj = integrate(scalar_quad(0), std::vector<double>{2.0}, cfg(1.0, 1e-3), 1.0);
  CHECK(traj.back().t == doctest::Approx(1.0));
  CHECK(std::abs(traj.back().g - 2.0 * std::exp(-1.0)) / 2.0 <= 1e-4);

  for (const auto& name : problem_names()) {
    const Problem p = make_problem(name);
    for (double alpha : {0.5, 2.0}) {
      const auto tr = integrate(p, p.x0, cfg(alpha, 1e-3), 5.0 / alpha);
      const double lg0 = std::log(tr.front().g);
      for (const auto& pt : tr) {
        if (pt.t == 0.0) continue;
        CHECK(std::abs(std::log(pt.g) - (lg0 - alpha * pt.t)) <= 0.01 * alpha * pt.t);
      }
    }
  }
}

TEST_CASE("equality variant strictly decreases g") {
  for (const auto& name : problem_names()) {
    const Problem p = make_problem(name);
    const auto tr = integrate(p, p.x0, cfg(1.0, 1e-2, Scheme::euler), 2.0);
    for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr[i].g < tr[i - 1].g);
  }
}

TEST_CASE("positive part variant stays under the envelope") {
  for (const auto& name : problem_names()) {
    const Problem p = make_problem(name);
    const double tau = 1e-3;
    const auto tr = integrate(p, p.x0, cfg(1.0, tau, Scheme::rk4, LambdaVariant::positive_part), 3.0);
    for (const auto& pt : tr) CHECK(pt.g <= std::exp(-pt.t) * tr.front().g * (1.0 + 10.0 * tau));
  }
}

TEST_CASE("stationary start stays put") {
  const auto tr = integrate(scalar_quad(0), std::vector<double>{0.0}, cfg(1.0, 1e-2), 0.5);
  for (const auto& pt : tr) CHECK(pt.x[0] == 0.0);
}

TEST_CASE("KKT residual monitor") {
  for (const auto& name : problem_names()) {
    const Problem p = make_problem(name);
    const double alpha = 1.0, t_end = 20.0;
    const auto tr = integrate(p, p.x0, cfg(alpha, 1e-3), t_end);
    for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr[i].kkt_running_min <= tr[i - 1].kkt_running_min);
    if (!p.f_min || !p.grad_f_bound || !p.pl_constant) continue;
    const double c = residual_bound_constant(p.f(p.x0), *p.f_min, p.g(p.x0), *p.grad_f_bound, *p.pl_constant, alpha);
    CHECK(tr.back().kkt_running_min <= c / std::sqrt(t_end));
  }
}

TEST_CASE("tangent residual") {
  // grad f = (1, 0), grad g = (0, 1): the whole of grad f is tangent
  CHECK(tangent_residual(linear_over_parabola(), std::vector<double>{0.0, 1.0}) == doctest::Approx(1.0));
  // parallel gradients leave nothing
  CHECK(tangent_residual(scalar_quad(1), std::vector<double>{0.7}) == doctest::Approx(0.0));
}

TEST_CASE("non-finite state is reported") {
  Problem p = scalar_quad(0);
  p.grad_f = [](PointView x) { return Point{x[0] > 1.5 ? NAN : 0.0}; };
  CHECK_THROWS_AS(integrate(p, std::vector<double>{2.0}, cfg(1.0, 1e-2), 1.0), NumericalError);
}
