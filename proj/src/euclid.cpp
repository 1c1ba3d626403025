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

#include "msd/euclid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace msd::euclid {

void FlowConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("euclid: alpha must be positive");
  if (!(tau > 0.0)) throw ConfigError("euclid: tau must be positive");
  if (!(alpha * tau < 1.0)) throw ConfigError("euclid: alpha * tau must be below 1");
  if (!(denom_floor > 0.0)) throw ConfigError("euclid: denominator floor must be positive");
  if (max_steps == 0) throw ConfigError("euclid: max_steps must be positive");
}

double lambda(const Problem& prob, PointView x, double alpha, double denom_floor, LambdaVariant variant) {
  const Point gf = prob.grad_f(x);
  const Point gg = prob.grad_g(x);
  const double gval = prob.g(x);
  if (!all_finite(gf) || !all_finite(gg) || !std::isfinite(gval))
    throw NumericalError("euclid: non-finite gradient or constraint value");
  const double n2 = squared_norm(gg);
  if (gval > 0.0 && n2 == 0.0)
    throw DomainError("euclid: constraint gradient vanishes at an infeasible point");
  const double lam = (-dot(gg, gf) + alpha * gval) / std::max(n2, denom_floor);
  return variant == LambdaVariant::positive_part ? std::max(lam, 0.0) : lam;
}

Point velocity(const Problem& prob, PointView x, const FlowConfig& cfg) {
  const double lam = lambda(prob, x, cfg.alpha, cfg.denom_floor, cfg.variant);
  const Point gf = prob.grad_f(x);
  const Point gg = prob.grad_g(x);
  Point phi(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) phi[i] = -(gf[i] + lam * gg[i]);
  return phi;
}

Point step(const Problem& prob, PointView x, const FlowConfig& cfg) {
  const Point phi = velocity(prob, x, cfg);
  Point out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += cfg.tau * phi[i];
  return out;
}

double tangent_residual(const Problem& prob, PointView x, double denom_floor) {
  const Point gf = prob.grad_f(x);
  const Point gg = prob.grad_g(x);
  const double n2 = squared_norm(gg);
  if (n2 < denom_floor) return std::sqrt(squared_norm(gf));
  const double c = dot(gf, gg) / n2;
  Point r(gf);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= c * gg[i];
  return std::sqrt(squared_norm(r));
}

namespace {

Point rk4_step(const Problem& prob, const Point& x, const FlowConfig& cfg) {
  const std::size_t n = x.size();
  const double h = cfg.tau;
  auto shifted = [&](const Point& k, double s) {
    Point y(x);
    for (std::size_t i = 0; i < n; ++i) y[i] += s * k[i];
    return y;
  };
  const Point k1 = velocity(prob, x, cfg);
  const Point k2 = velocity(prob, shifted(k1, 0.5 * h), cfg);
  const Point k3 = velocity(prob, shifted(k2, 0.5 * h), cfg);
  const Point k4 = velocity(prob, shifted(k3, h), cfg);
  Point y(x);
  for (std::size_t i = 0; i < n; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return y;
}

TrajectoryPoint record(const Problem& prob, const Point& x, double t, const FlowConfig& cfg, double running_min) {
  TrajectoryPoint p;
  p.t = t;
  p.x = x;
  p.g = prob.g(x);
  p.f = prob.f(x);
  p.lambda = lambda(prob, x, cfg.alpha, cfg.denom_floor, cfg.variant);
  p.phi_norm = std::sqrt(squared_norm(velocity(prob, x, cfg)));
  p.kkt_residual = tangent_residual(prob, x, cfg.denom_floor);
  p.kkt_running_min = std::min(running_min, p.kkt_residual);
  return p;
}

}  // namespace

std::vector<TrajectoryPoint> integrate(const Problem& prob, PointView x0, const FlowConfig& cfg, double t_end) {
  cfg.validate();
  if (!(t_end > 0.0)) throw ConfigError("euclid: T_end must be positive");
  if (x0.size() != prob.dim) throw ConfigError("euclid: start point has the wrong dimension");
  const auto steps = std::min<std::size_t>(static_cast<std::size_t>(std::llround(t_end / cfg.tau)), cfg.max_steps);
  std::vector<TrajectoryPoint> traj;
  traj.reserve(steps + 1);
  Point x(x0.begin(), x0.end());
  traj.push_back(record(prob, x, 0.0, cfg, INFINITY));
  for (std::size_t s = 1; s <= steps; ++s) {
    x = cfg.scheme == Scheme::rk4 ? rk4_step(prob, x, cfg) : step(prob, x, cfg);
    const double t = static_cast<double>(s) * cfg.tau;
    if (!all_finite(x)) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "euclid: integration failed at t = %.6g", t);
      throw NumericalError(buf);
    }
    traj.push_back(record(prob, x, t, cfg, traj.back().kkt_running_min));
  }
  return traj;
}

double residual_bound_constant(double f0, double f_min, double g0, double grad_f_bound, double pl_constant,
                               double alpha) {
  return f0 - f_min + 2.0 * g0 / pl_constant + grad_f_bound / (alpha * std::sqrt(pl_constant)) * std::sqrt(g0);
}

std::vector<std::string> problem_names() { return {"quad_origin", "line_hyperbolic", "quad_sphere"}; }

Problem make_problem(const std::string& name) {
  Problem p;
  p.name = name;
  if (name == "quad_origin") {
    // f = 0, g = |x|^2 / 2
    p.dim = 2;
    p.f = [](PointView) { return 0.0; };
    p.grad_f = [](PointView x) { return Point(x.size(), 0.0); };
    p.g = [](PointView x) { return 0.5 * squared_norm(x); };
    p.grad_g = [](PointView x) { return Point(x.begin(), x.end()); };
    p.x0 = {2.0, -1.0};
    p.f_min = 0.0;
    p.grad_f_bound = 0.0;
    p.pl_constant = 2.0;
    return p;
  }
  if (name == "line_hyperbolic") {
    // f = sqrt(1 + |x - b|^2) on the line <a, x> = 1, g = (<a, x> - 1)^2 / 2
    const Point a{1.0, 1.0};
    const Point b{2.0, -1.0};
    p.dim = 2;
    p.f = [b](PointView x) {
      double s = 1.0;
      for (std::size_t i = 0; i < 2; ++i) s += (x[i] - b[i]) * (x[i] - b[i]);
      return std::sqrt(s);
    };
    p.grad_f = [b](PointView x) {
      double s = 1.0;
      for (std::size_t i = 0; i < 2; ++i) s += (x[i] - b[i]) * (x[i] - b[i]);
      const double r = std::sqrt(s);
      return Point{(x[0] - b[0]) / r, (x[1] - b[1]) / r};
    };
    p.g = [a](PointView x) {
      const double r = dot(a, x) - 1.0;
      return 0.5 * r * r;
    };
    p.grad_g = [a](PointView x) {
      const double r = dot(a, x) - 1.0;
      return Point{r * a[0], r * a[1]};
    };
    p.x0 = {3.0, 2.0};
    p.f_min = 1.0;
    p.grad_f_bound = 1.0;
    p.pl_constant = 2.0 * squared_norm(a);
    return p;
  }
  if (name == "quad_sphere") {
    // nearest point of the unit sphere to c: f = |x - c|^2 / 2, g = (|x|^2 - 1)^2 / 2
    const Point c{2.0, 1.0, 0.5};
    p.dim = 3;
    p.f = [c](PointView x) {
      double s = 0.0;
      for (std::size_t i = 0; i < 3; ++i) s += (x[i] - c[i]) * (x[i] - c[i]);
      return 0.5 * s;
    };
    p.grad_f = [c](PointView x) { return Point{x[0] - c[0], x[1] - c[1], x[2] - c[2]}; };
    p.g = [](PointView x) {
      const double r = squared_norm(x) - 1.0;
      return 0.5 * r * r;
    };
    p.grad_g = [](PointView x) {
      const double r = 2.0 * (squared_norm(x) - 1.0);
      return Point{r * x[0], r * x[1], r * x[2]};
    };
    p.x0 = {0.2, -1.5, 1.0};
    return p;
  }
  throw ConfigError("euclid: unknown problem '" + name + "'");
}

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryPoint>& traj) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "t,g,f,kkt_residual";
  const std::size_t n = traj.empty() ? 0 : traj.front().x.size();
  for (std::size_t i = 1; i <= n; ++i) out << ",x" << i;
  out << '\n';
  char buf[64];
  for (const auto& p : traj) {
    std::snprintf(buf, sizeof buf, "%.17g", p.t);
    out << buf;
    for (double v : {p.g, p.f, p.kkt_residual}) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    for (double v : p.x) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace msd::euclid
