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

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "msd/common.hpp"

namespace msd {

class TargetSpec;

/// Analytic reference distributions. Every family exposes sampling, the
/// log-density and its gradient (the score).
class TargetSpec {
public:
  struct Gaussian1d {
    double mean;
    double sd;
  };
  struct MvNormal {
    std::vector<double> mean;
    std::vector<double> cov;        // d x d, row-major
    std::vector<double> chol;       // lower Cholesky factor of cov
    std::vector<double> precision;  // cov^{-1}
    double log_norm;                // -0.5 * (d log 2pi + log det cov)
  };
  /// Lognormal on (0, inf): log X ~ N(scale, shape^2).
  struct Lognormal {
    double scale;
    double shape;
  };
  /// Uniform on [a, b] convolved with a logistic of scale 1/sharpness. The
  /// density is proportional to sigmoid(s(x-a)) * sigmoid(s(b-x)), so the
  /// log-density is a pair of softplus barriers.
  struct SmoothedUniform {
    double a;
    double b;
    double sharpness;
    double log_norm;
  };
  struct Mixture {
    std::vector<double> weights;
    std::vector<TargetSpec> components;
  };

  static TargetSpec gaussian1d(double mean, double sd);
  static TargetSpec mvnormal(std::vector<double> mean, std::vector<double> cov);
  static TargetSpec lognormal(double scale, double shape);
  /// sharpness <= 0 selects the default 50 / (b - a).
  static TargetSpec smoothed_uniform(double a, double b, double sharpness = 0.0);
  static TargetSpec mixture(std::vector<std::pair<double, TargetSpec>> components);

  std::size_t dim() const { return dim_; }
  std::string family_name() const;
  const auto& family() const { return family_; }

  /// Natural log of the density. Returns -infinity outside the support.
  double log_density(PointView x) const;
  /// Gradient of log_density. Throws DomainError outside the open support.
  Point score(PointView x) const;
  /// Whether x lies strictly inside the support.
  bool in_support(PointView x) const;

  /// Draws one point using the caller's generator.
  void draw(Rng& rng, std::span<double> out) const;

private:
  using Family = std::variant<Gaussian1d, MvNormal, Lognormal, SmoothedUniform, Mixture>;
  TargetSpec(Family f, std::size_t dim) : family_(std::move(f)), dim_(dim) {}

  Family family_;
  std::size_t dim_ = 1;
};

/// n i.i.d. draws; a pure function of (spec, n, seed).
PointCloud sample(const TargetSpec& spec, std::size_t n, std::uint64_t seed);

}  // namespace msd
