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

#include "msd/kernels.hpp"

#include <cmath>

namespace msd {
namespace {

void check_elo(PointView x, PointView y) {
  if (x.size() != 1 || y.size() != 1) throw DomainError("elo kernel: requires d = 1");
  if (!(x[0] > 0.0) || !(y[0] > 0.0))
    throw DomainError("elo kernel: skill levels must be strictly positive");
}

inline double elo_value(double x, double y) {
  const double s = x + y;
  return 0.5 * (x * x + y * y) / (s * s) - 0.25;
}

// d/dx of elo_value; the y-partial follows by symmetry.
inline double elo_partial1(double x, double y) {
  const double s = x + y;
  return (x * y - y * y) / (s * s * s);
}

}  // namespace

KernelSpec KernelSpec::elo() {
  KernelSpec k;
  k.kind_ = Kind::elo;
  k.name_ = "elo";
  k.dim_ = 1;
  return k;
}

KernelSpec KernelSpec::variance(std::vector<double> w, std::size_t dim) {
  if (dim == 0 || w.size() != dim * dim) throw ConfigError("variance kernel: W must be d x d");
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(w[i * dim + j] - w[j * dim + i]) > 1e-12 * (1.0 + std::abs(w[i * dim + j])))
        throw ConfigError("variance kernel: W must be symmetric");
  KernelSpec k;
  k.kind_ = Kind::variance;
  k.name_ = "variance";
  k.w_ = std::move(w);
  k.dim_ = dim;
  return k;
}

KernelSpec KernelSpec::variance_diagonal(const std::vector<double>& diag) {
  const std::size_t d = diag.size();
  std::vector<double> w(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) w[i * d + i] = diag[i];
  return variance(std::move(w), d);
}

KernelSpec KernelSpec::custom(std::string name, EvalFn eval, GradFn grad) {
  if (!eval || !grad) throw ConfigError("custom kernel: both value and gradient callables are required");
  KernelSpec k;
  k.kind_ = Kind::custom;
  k.name_ = std::move(name);
  k.eval_ = std::move(eval);
  k.grad_ = std::move(grad);
  return k;
}

KernelSpec KernelSpec::zero() {
  return custom(
      "zero", [](PointView, PointView) { return 0.0; },
      [](PointView, PointView, std::span<double> g1, std::span<double> g2) {
        std::fill(g1.begin(), g1.end(), 0.0);
        std::fill(g2.begin(), g2.end(), 0.0);
      });
}

double KernelSpec::eval(PointView x, PointView y) const {
  switch (kind_) {
    case Kind::elo:
      check_elo(x, y);
      return elo_value(x[0], y[0]);
    case Kind::variance: {
      if (x.size() != dim_ || y.size() != dim_) throw DomainError("variance kernel: dimension mismatch");
      double acc = 0.0;
      for (std::size_t i = 0; i < dim_; ++i) {
        const double di = x[i] - y[i];
        for (std::size_t j = 0; j < dim_; ++j) acc += di * w_[i * dim_ + j] * (x[j] - y[j]);
      }
      return acc;
    }
    case Kind::custom:
      return eval_(x, y);
  }
  return 0.0;
}

void KernelSpec::grad(PointView x, PointView y, std::span<double> g1, std::span<double> g2) const {
  switch (kind_) {
    case Kind::elo:
      check_elo(x, y);
      g1[0] = elo_partial1(x[0], y[0]);
      g2[0] = elo_partial1(y[0], x[0]);
      return;
    case Kind::variance:
      if (x.size() != dim_ || y.size() != dim_) throw DomainError("variance kernel: dimension mismatch");
      for (std::size_t i = 0; i < dim_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) acc += (w_[i * dim_ + j] + w_[j * dim_ + i]) * (x[j] - y[j]);
        g1[i] = acc;
        g2[i] = -acc;
      }
      return;
    case Kind::custom:
      grad_(x, y, g1, g2);
      return;
  }
}

double kernel_eval(const KernelSpec& kern, PointView x, PointView y) { return kern.eval(x, y); }

std::pair<Point, Point> kernel_grad(const KernelSpec& kern, PointView x, PointView y) {
  Point g1(x.size()), g2(x.size());
  kern.grad(x, y, g1, g2);
  return {std::move(g1), std::move(g2)};
}

double loss_estimate(const KernelSpec& kern, const PointCloud& points) {
  const std::size_t n = points.size();
  if (n == 0) throw ConfigError("loss_estimate: needs at least one point");
  const double inv = 1.0 / static_cast<double>(n);
  if (kern.kind() == KernelSpec::Kind::variance) {
    // (1/N^2) sum_ij (x_i-x_j)^T W (x_i-x_j) = 2 (1/N) sum_i (x_i-m)^T W (x_i-m)
    const std::size_t d = points.dim();
    if (d != kern.required_dim()) throw DomainError("variance kernel: dimension mismatch");
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) mean[j] += points[i][j];
    for (double& m : mean) m *= inv;
    std::vector<double> terms(n);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
          acc += (points[i][a] - mean[a]) * kern.w()[a * d + b] * (points[i][b] - mean[b]);
      terms[i] = acc;
    }
    return 2.0 * inv * pairwise_sum(terms);
  }
  std::vector<double> rows(n);
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      double acc = 0.0;
      if (kern.kind() == KernelSpec::Kind::elo) {
        if (points.dim() != 1) throw DomainError("elo kernel: requires d = 1");
        const double xi = points[i][0];
        for (std::size_t j = 0; j < n; ++j) {
          const double xj = points[j][0];
          if (!(xi > 0.0) || !(xj > 0.0)) throw DomainError("elo kernel: skill levels must be strictly positive");
          acc += elo_value(xi, xj);
        }
      } else {
        for (std::size_t j = 0; j < n; ++j) acc += kern.eval(points[i], points[j]);
      }
      rows[i] = acc;
    }
  });
  return pairwise_sum(rows) * inv * inv;
}

Point grad_L_at(const KernelSpec& kern, const PointCloud& points, PointView x) {
  const std::size_t n = points.size();
  const std::size_t d = x.size();
  if (n == 0) throw ConfigError("grad_L_at: needs at least one point");
  Point acc(d, 0.0), g1(d), g2(d), h1(d), h2(d);
  for (std::size_t j = 0; j < n; ++j) {
    kern.grad(x, points[j], g1, g2);  // grad_1 l(x, z)
    kern.grad(points[j], x, h1, h2);  // grad_2 l(z, x)
    for (std::size_t a = 0; a < d; ++a) acc[a] += g1[a] + h2[a];
  }
  for (double& v : acc) v /= static_cast<double>(n);
  return acc;
}

PointCloud grad_L_field(const KernelSpec& kern, const PointCloud& points) {
  const std::size_t n = points.size();
  const std::size_t d = points.dim();
  PointCloud out(n, d);
  if (n == 0) return out;
  const double inv = 1.0 / static_cast<double>(n);
  switch (kern.kind()) {
    case KernelSpec::Kind::variance: {
      if (d != kern.required_dim()) throw DomainError("variance kernel: dimension mismatch");
      std::vector<double> mean(d, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < d; ++a) mean[a] += points[i][a];
      for (double& m : mean) m *= inv;
      const auto& w = kern.w();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < d; ++a) {
          double acc = 0.0;
          for (std::size_t b = 0; b < d; ++b) acc += (w[a * d + b] + w[b * d + a]) * (points[i][b] - mean[b]);
          out[i][a] = 2.0 * acc;
        }
      return out;
    }
    case KernelSpec::Kind::elo: {
      if (d != 1) throw DomainError("elo kernel: requires d = 1");
      for (std::size_t i = 0; i < n; ++i)
        if (!(points[i][0] > 0.0)) throw DomainError("elo kernel: particle " + std::to_string(i) + " is not positive");
      parallel_for(n, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
          const double x = points[i][0];
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += elo_partial1(x, points[j][0]);
          // grad_2 l(z, x) equals grad_1 l(x, z) by symmetry
          out[i][0] = 2.0 * acc * inv;
        }
      });
      return out;
    }
    case KernelSpec::Kind::custom:
      for (std::size_t i = 0; i < n; ++i) {
        const Point g = grad_L_at(kern, points, points[i]);
        std::copy(g.begin(), g.end(), out[i].begin());
      }
      return out;
  }
  return out;
}

}  // namespace msd
