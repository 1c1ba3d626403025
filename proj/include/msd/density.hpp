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

#include <vector>

#include "msd/common.hpp"
#include "msd/ensemble.hpp"
#include "msd/targets.hpp"

namespace msd {

/// Gaussian product-kernel density estimate settings.
struct KdeConfig {
  enum class Bandwidth { silverman, fixed };
  Bandwidth mode = Bandwidth::silverman;
  double h = 1.0;  // used when mode == fixed
  /// Density constant -0.5 ln(2 pi) with no bandwidth or dimension factor.
  /// Scores are unaffected.
  bool unscaled_constant = false;

  static KdeConfig fixed(double h);
  static KdeConfig silverman() { return {}; }
};

/// Per-dimension bandwidth. Silverman: h_j = sd_j (4 / ((d + 2) n_eff))^(1/(d+4))
/// with weighted sd and n_eff = 1 / sum w^2; a zero spread falls back to 1.
std::vector<double> resolve_bandwidth(const PointCloud& points, std::span<const double> weights,
                                      const KdeConfig& cfg);

/// Weighted Gaussian KDE over a fixed sample.
class Kde {
public:
  Kde(PointCloud points, std::vector<double> weights, const KdeConfig& cfg);

  const std::vector<double>& bandwidth() const { return h_; }
  /// Geometric mean of the per-dimension bandwidths.
  double bandwidth_summary() const;

  double log_density(PointView x) const;
  Point score(PointView x) const;
  /// Both in one pass over the sample; returns the log density.
  double evaluate(PointView x, std::span<double> score_out) const;

private:
  PointCloud points_;
  std::vector<double> log_w_;
  std::vector<double> h_;
  std::vector<double> inv_h2_;
  double log_norm_ = 0.0;
};

double kde_log_density(const PointCloud& points, std::span<const double> weights, const KdeConfig& cfg, PointView x);
Point kde_score(const PointCloud& points, std::span<const double> weights, const KdeConfig& cfg, PointView x);

/// sum_i w_i [log mu_hat(x_i) - log pi(x_i)] over the pooled particles. Unclamped.
double kl_estimate(const DecompositionState& state, const TargetSpec& target, const KdeConfig& cfg);

/// Component k: (1/N) sum_i [log mu_hat(x_k^i) - log pi(x_k^i)] + 1.
std::vector<double> kl_grad_weights(const DecompositionState& state, const TargetSpec& target, const KdeConfig& cfg);

/// Everything the flow needs from one density pass over the pooled particles.
/// Per-particle arrays are ordered group by group.
struct PooledDensity {
  std::vector<double> log_mu;
  std::vector<double> log_pi;
  PointCloud score_mu;
  PointCloud score_pi;
  std::vector<double> bandwidth;
  double bandwidth_summary = 0.0;
  double kl = 0.0;
  std::vector<double> kl_grad_weights;
};

/// Throws DomainError naming the first particle outside the target support.
PooledDensity evaluate_pooled(const DecompositionState& state, const TargetSpec& target, const KdeConfig& cfg,
                              bool with_scores = true);

}  // namespace msd
