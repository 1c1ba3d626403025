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

#include "msd/density.hpp"
#include "msd/ensemble.hpp"
#include "msd/kernels.hpp"
#include "msd/targets.hpp"

namespace msd {

enum class FlowMode { fixed_weights, dynamic_weights };

/// How a particle step that would leave the positive half-line is handled.
///   reflect:    x' = |x + eta phi|, halving x instead when that is exactly 0
///   log_domain: x' = x exp(eta phi / x)
enum class PositivityGuard { none, reflect, log_domain };

struct FlowConfig {
  FlowMode mode = FlowMode::fixed_weights;
  double alpha = 1.0;
  /// Particle step. Zero picks a default from the initial state (see default_eta).
  double eta = 0.0;
  /// Weight step. Zero means 0.1 * eta.
  double eta2 = 0.0;
  std::size_t iterations = 200;
  double theta = 1e-4;
  double beta = 1.0;
  double denom_floor = 1e-10;
  double p_floor = kDefaultWeightFloor;
  KdeConfig kde;
  /// Unset: reflect when the kernel is elo, none otherwise.
  std::optional<PositivityGuard> guard;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  PositivityGuard resolved_guard(const KernelSpec& kern) const;
};

/// 0.05 times the smallest per-axis variance of the pooled particles. For the
/// variance kernel the result is capped at 0.1 / (4 |W|), which keeps the
/// contraction -4 p W (x - mean) well inside the stable range.
double default_eta(const DecompositionState& state, const KernelSpec& kern);

struct VelocityField {
  std::vector<PointCloud> phi;          // one cloud per group, aligned with the particles
  std::vector<double> weight_velocity;  // zero in fixed-weight mode
  double lambda = 0.0;
  double lambda_denominator = 0.0;  // floored denominator actually used
  double kl = 0.0;                  // raw estimate, may be negative
  double bandwidth = 0.0;           // geometric mean of the per-dimension bandwidths
  double phi_norm = 0.0;            // sum_k mean_i |phi_k^i|^2, plus |v|^2 in dynamic mode
  std::vector<double> group_loss;   // L_hat(mu_k)
};

/// v - mean(v).
std::vector<double> project_simplex_tangent(std::span<const double> v);

VelocityField velocity_fixed(const DecompositionState& state, const KernelSpec& kern, const TargetSpec& target,
                             const FlowConfig& cfg);
VelocityField velocity_dynamic(const DecompositionState& state, const KernelSpec& kern, const TargetSpec& target,
                               const FlowConfig& cfg);

DecompositionState step_fixed(const DecompositionState& state, const VelocityField& vel, double eta,
                              PositivityGuard guard = PositivityGuard::none);

/// Particles first, then weights: p + eta2 v, clamped at p_floor, with the
/// excess taken from the unclamped entries in proportion to p_k - p_floor.
DecompositionState step_dynamic(const DecompositionState& state, const VelocityField& vel, double eta, double eta2,
                                double p_floor, PositivityGuard guard = PositivityGuard::none);

/// sum_k p_k L_hat(mu_k), plus sum_k theta / p_k^beta in dynamic mode.
double objective(const DecompositionState& state, const KernelSpec& kern, FlowMode mode, double theta, double beta);

struct RunRecord {
  std::vector<double> kl;
  std::vector<double> objective;
  std::vector<double> lambda;
  std::vector<double> phi_norm;
  std::vector<double> bandwidth;
  std::vector<std::vector<double>> weights;
  double eta = 0.0;
  double eta2 = 0.0;
  std::uint64_t seed = 0;
  DecompositionState final_state;
  /// Set when a numerical failure stopped the run; series end at the last good t.
  std::optional<std::size_t> failed_at;
  std::string failure;

  std::size_t length() const { return kl.size(); }
};

/// Called with every state the run visits, t = 0..T.
using StateObserver = std::function<void(const DecompositionState&)>;

/// Runs cfg.iterations steps from `initial` in the configured mode.
RunRecord run_flow(DecompositionState initial, const TargetSpec& target, const KernelSpec& kern,
                   const FlowConfig& cfg, const StateObserver& observer = {});

RunRecord run_fixed(const TargetSpec& target, const KernelSpec& kern, std::size_t k, std::size_t n,
                    const std::vector<double>& weights, FlowConfig cfg, std::uint64_t seed,
                    const StateObserver& observer = {});
RunRecord run_dynamic(const TargetSpec& target, const KernelSpec& kern, std::size_t k, std::size_t n, FlowConfig cfg,
                      std::uint64_t seed, const StateObserver& observer = {});

}  // namespace msd
