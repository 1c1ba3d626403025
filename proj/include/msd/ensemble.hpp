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
#include <optional>
#include <vector>

#include "msd/common.hpp"
#include "msd/kernels.hpp"
#include "msd/targets.hpp"

namespace msd {

/// K groups of N particles each, all of dimension d.
class ParticleSet {
public:
  ParticleSet() = default;
  explicit ParticleSet(std::vector<PointCloud> groups);

  std::size_t groups() const { return groups_.size(); }
  std::size_t per_group() const { return groups_.empty() ? 0 : groups_.front().size(); }
  std::size_t dim() const { return groups_.empty() ? 0 : groups_.front().dim(); }

  const PointCloud& group(std::size_t k) const { return groups_[k]; }
  PointCloud& group(std::size_t k) { return groups_[k]; }

  friend bool operator==(const ParticleSet&, const ParticleSet&) = default;

private:
  std::vector<PointCloud> groups_;
};

constexpr double kDefaultWeightFloor = 1e-3;
constexpr double kSimplexTolerance = 1e-12;

/// Weights on the simplex with every entry at or above a positive floor.
class WeightVector {
public:
  WeightVector() = default;
  /// Validates; throws ConfigError when off the simplex or below the floor.
  explicit WeightVector(std::vector<double> p, double floor = kDefaultWeightFloor);

  static WeightVector equal(std::size_t k, double floor = kDefaultWeightFloor);

  std::size_t size() const { return p_.size(); }
  double operator[](std::size_t k) const { return p_[k]; }
  const std::vector<double>& values() const { return p_; }
  double floor() const { return floor_; }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

private:
  std::vector<double> p_;
  double floor_ = kDefaultWeightFloor;
};

struct DecompositionState {
  ParticleSet particles;
  WeightVector weights;
  std::size_t iteration = 0;
  std::uint64_t rng_seed = 0;

  friend bool operator==(const DecompositionState&, const DecompositionState&) = default;
};

/// Throws ConfigError when the weight count differs from the group count or a
/// coordinate is non-finite.
void validate(const DecompositionState& state);

/// Every group is filled with N i.i.d. draws from the target, so the pooled
/// measure matches the target up to sampling noise. Empty `weights` means equal.
DecompositionState init_from_target(const TargetSpec& target, std::size_t k, std::size_t n, std::uint64_t seed,
                                    const std::optional<std::vector<double>>& weights = std::nullopt,
                                    double weight_floor = kDefaultWeightFloor);

/// Moves every particle to m + spread (x - m), m the weighted pooled mean.
/// spread < 1 starts the flow away from feasibility.
void rescale_about_mean(DecompositionState& state, double spread);

struct SwapInitOptions {
  std::size_t sweeps = 20;
  /// Seeded radial starts tried besides the draw-order start.
  std::size_t restarts = 8;
  /// When set, the only start is the radial one around this point.
  std::optional<Point> centre;
  /// Radial blocks are handed out from group K down to group 1.
  bool reverse = false;
};

/// Draws a pool from the target, partitions it into K groups with sizes
/// proportional to the weights and lowers sum_k p_k L_hat(mu_k) by greedy
/// best-swap sweeps. Starts: the draw order, plus seeded radial starts (pool
/// sorted by distance to a random pool point, split into contiguous blocks in
/// forward and reverse group order); the best local optimum wins. Larger
/// groups are then thinned to N points (evenly spaced order statistics in 1-D,
/// evenly spaced draws otherwise).
DecompositionState init_swap_refined(const TargetSpec& target, const KernelSpec& kern, std::size_t k, std::size_t n,
                                     std::uint64_t seed, const std::optional<std::vector<double>>& weights = std::nullopt,
                                     double weight_floor = kDefaultWeightFloor, const SwapInitOptions& opts = {});

struct WeightedSamples {
  PointCloud points;
  std::vector<double> weights;
};

/// Materialises sum_k p_k mu_k: particle i of group k gets weight p_k / N.
/// Points are ordered group by group.
WeightedSamples pooled_samples(const DecompositionState& state);

}  // namespace msd
