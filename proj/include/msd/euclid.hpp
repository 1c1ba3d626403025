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

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "msd/common.hpp"

namespace msd::euclid {

/// minimize f(x) subject to g(x) = 0 with g >= 0.
struct Problem {
  using Scalar = std::function<double(PointView)>;
  using Vector = std::function<Point(PointView)>;

  std::string name;
  std::size_t dim = 0;
  Scalar f;
  Vector grad_f;
  Scalar g;
  Vector grad_g;
  Point x0;

  // Constants for the residual bound, when known.
  std::optional<double> f_min;
  std::optional<double> grad_f_bound;  // sup |grad f|
  std::optional<double> pl_constant;   // |grad g|^2 >= kappa g
};

enum class Scheme { euler, rk4 };
enum class LambdaVariant { equality, positive_part };

struct FlowConfig {
  double alpha = 1.0;
  double tau = 1e-3;
  Scheme scheme = Scheme::rk4;
  LambdaVariant variant = LambdaVariant::equality;
  std::size_t max_steps = 10'000'000;
  double denom_floor = 1e-12;

  /// Throws ConfigError unless alpha, tau, denom_floor > 0 and alpha * tau < 1.
  void validate() const;
};

/// (-<grad g, grad f> + alpha g) / max(|grad g|^2, floor), clipped at 0 for the
/// positive-part variant. Throws DomainError when g > 0 and grad g = 0.
double lambda(const Problem& prob, PointView x, double alpha, double denom_floor,
              LambdaVariant variant = LambdaVariant::equality);

/// phi(x) = -(grad f + lambda grad g).
Point velocity(const Problem& prob, PointView x, const FlowConfig& cfg);

/// One explicit Euler step x + tau phi(x).
Point step(const Problem& prob, PointView x, const FlowConfig& cfg);

/// |grad f - (<grad f, grad g> / |grad g|^2) grad g|, or |grad f| when grad g vanishes.
double tangent_residual(const Problem& prob, PointView x, double denom_floor = 1e-12);

struct TrajectoryPoint {
  double t = 0.0;
  Point x;
  double g = 0.0;
  double f = 0.0;
  double lambda = 0.0;
  double phi_norm = 0.0;
  double kkt_residual = 0.0;
  double kkt_running_min = 0.0;
};

/// Integrates over [0, t_end] with fixed step tau. Throws NumericalError naming
/// t when the state stops being finite.
std::vector<TrajectoryPoint> integrate(const Problem& prob, PointView x0, const FlowConfig& cfg, double t_end);

/// f(x0) - f_min + 2 g(x0) / kappa + L sqrt(g(x0)) / (alpha sqrt(kappa)).
double residual_bound_constant(double f0, double f_min, double g0, double grad_f_bound, double pl_constant,
                               double alpha);

/// Built-in problems: quad_origin, line_hyperbolic, quad_sphere.
std::vector<std::string> problem_names();
Problem make_problem(const std::string& name);

/// Header t,g,f,kkt_residual,x1..xn; one row per trajectory point.
void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryPoint>& traj);

}  // namespace msd::euclid
