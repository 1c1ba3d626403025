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
#include <string>
#include <utility>
#include <vector>

#include "msd/density.hpp"
#include "msd/ensemble.hpp"
#include "msd/kernels.hpp"
#include "msd/wflow.hpp"

namespace msd {

/// Regular lattice: point (i_1..i_d) sits at lo + i * spacing.
struct Lattice {
  Point lo;
  double spacing = 0.0;
  std::vector<std::size_t> counts;

  std::size_t size() const;
  Point point(std::size_t flat) const;
  /// Nearest lattice index, or nullopt when x is outside the lattice.
  std::optional<std::size_t> nearest(PointView x) const;
};

/// Optional overrides for the lattice; unset fields use spacing delta/2 and the
/// particle bounding box inflated by 3 bandwidths.
struct GridSpec {
  std::optional<double> spacing;
  std::optional<Point> lo;
  std::optional<Point> hi;
};

/// Membership of every lattice point in each group's (delta, c)-interior support.
struct SupportMask {
  Lattice lattice;
  std::vector<std::vector<std::uint8_t>> member;  // [group][lattice point]
  double delta = 0.0;
  double c = 0.0;
  std::vector<double> bandwidth;  // per group, geometric mean over dimensions
};

/// A lattice point is kept iff the uniform-weight KDE of `points` exceeds c at
/// every lattice point within distance delta; points off the lattice count as
/// below the threshold. Throws ConfigError when the spacing exceeds delta/2.
SupportMask interior_support(const PointCloud& points, const KdeConfig& cfg, double delta, double c,
                             const GridSpec& grid = {});

/// All groups on one shared lattice.
SupportMask interior_supports(const ParticleSet& particles, const KdeConfig& cfg, double delta, double c,
                              const GridSpec& grid = {});

struct DisjointnessReport {
  bool disjoint = true;
  /// Lattice points in two or more masks over lattice points in at least one.
  double overlap_fraction = 0.0;
  std::size_t covered = 0;
  std::size_t shared = 0;
};

DisjointnessReport disjointness(const SupportMask& mask);
DisjointnessReport disjointness_check(const DecompositionState& state, double delta, double c, const KdeConfig& cfg);

struct ConvexViolation {
  std::size_t group = 0;     // owner of the segment
  std::size_t intruder = 0;  // group whose support the segment crosses
  Point point;
};

struct ConvexReport {
  bool holds = true;
  std::vector<ConvexViolation> violations;
};

/// Samples n_segments pairs of support points per group and tests interior
/// segment points against the other groups' masks.
ConvexReport convex_in_pairs(const SupportMask& mask, std::size_t n_segments, std::uint64_t seed);
ConvexReport convex_in_pairs_check(const DecompositionState& state, double delta, double c, const KdeConfig& cfg,
                                   std::size_t n_segments, std::uint64_t seed = 0);

/// 0.1 times the smallest per-axis standard deviation of the pooled particles.
double default_delta(const DecompositionState& state);

/// Average win probability x / (x + y) of each grid level against `opponents`.
std::vector<double> win_rate_curve(std::span<const double> opponents, std::span<const double> grid);

/// Sort by `axis`, split into K contiguous equal-count groups, equal weights.
/// Samples beyond the largest multiple of K are dropped from the top.
DecompositionState baseline_parallel_slices(const PointCloud& samples, std::size_t k, std::size_t axis);

/// Lower w1-quantile versus the rest of 1-D samples. Both groups are thinned to
/// the smaller group's size by taking evenly spaced order statistics, so the
/// state keeps a common N; weights are (w1, 1 - w1).
DecompositionState baseline_quantile_split(const PointCloud& samples, double w1);

/// Boundary value used by baseline_quantile_split.
double quantile_boundary(const PointCloud& samples, double w1);

/// Single group holding all samples.
DecompositionState baseline_grand_league(const PointCloud& samples);

struct Atom {
  double location = 0.0;
  double mass = 0.0;
};

struct DiscreteDecomposition {
  std::vector<std::vector<double>> components;  // [group][atom] probabilities
  double objective = 0.0;
};

/// Exhaustive search over allocations of atom mass to K groups on a grid of
/// mass `grid_step`, subject to sum_k p_k mu_k = pi. Ties keep the first
/// allocation in ascending lexicographic order of the group-1 masses.
DiscreteDecomposition brute_force_discrete(const std::vector<Atom>& atoms, std::size_t k,
                                           const std::vector<double>& weights, const KernelSpec& kern,
                                           double grid_step);

/// Objective of a discrete decomposition.
double discrete_objective(const std::vector<Atom>& atoms, const std::vector<std::vector<double>>& components,
                          const std::vector<double>& weights, const KernelSpec& kern);

/// For pi = 1/4 d(a-1) + 1/2 d(a) + 1/4 d(a+1) with the elo kernel and equal
/// weights: the a > 1 where the bulk/tail and adjacent splits tie.
double elo_bulk_tail_crossover();

}  // namespace msd
