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
#include <string>
#include <utility>
#include <vector>

#include "msd/common.hpp"

namespace msd {

/// Pairwise kernel l(x, y) of a coupled loss L(mu) = E_{mu x mu}[l(X, Y)].
class KernelSpec {
public:
  enum class Kind { elo, variance, custom };

  using EvalFn = std::function<double(PointView, PointView)>;
  /// Writes grad_1 l(x, y) and grad_2 l(x, y).
  using GradFn = std::function<void(PointView, PointView, std::span<double>, std::span<double>)>;

  /// l(x, y) = (x/(x+y) - 1/2)^2 = 0.5 (x^2 + y^2) / (x + y)^2 - 1/4, for x, y > 0.
  static KernelSpec elo();
  /// l(x, y) = (x - y)^T W (x - y); W is d x d row-major and symmetric.
  static KernelSpec variance(std::vector<double> w, std::size_t dim);
  static KernelSpec variance_diagonal(const std::vector<double>& diag);
  static KernelSpec custom(std::string name, EvalFn eval, GradFn grad);
  /// l == 0; useful for isolating the constraint term of the flow.
  static KernelSpec zero();

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  const std::vector<double>& w() const { return w_; }
  /// 0 means any dimension.
  std::size_t required_dim() const { return dim_; }

  double eval(PointView x, PointView y) const;
  void grad(PointView x, PointView y, std::span<double> g1, std::span<double> g2) const;

private:
  Kind kind_ = Kind::elo;
  std::string name_;
  std::vector<double> w_;
  std::size_t dim_ = 0;
  EvalFn eval_;
  GradFn grad_;
};

double kernel_eval(const KernelSpec& kern, PointView x, PointView y);
std::pair<Point, Point> kernel_grad(const KernelSpec& kern, PointView x, PointView y);

/// V-statistic (1/N^2) sum_i sum_j l(x_i, x_j), self-pairs included.
double loss_estimate(const KernelSpec& kern, const PointCloud& points);

/// Wasserstein gradient of L at x against the empirical measure of `points`:
/// (1/N) sum_z [grad_1 l(x, z) + grad_2 l(z, x)].
Point grad_L_at(const KernelSpec& kern, const PointCloud& points, PointView x);

/// grad_L_at evaluated at every point of the cloud. The variance kernel uses
/// the closed form 2 (W + W^T)(x - mean).
PointCloud grad_L_field(const KernelSpec& kern, const PointCloud& points);

}  // namespace msd
