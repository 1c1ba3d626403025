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

#include "msd/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace msd {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_weights(const PointCloud& points, std::span<const double> weights) {
  if (points.size() == 0) throw ConfigError("kde: needs at least one point");
  if (weights.size() != points.size()) throw ConfigError("kde: one weight per point is required");
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("kde: weights must be finite and non-negative");
  const double total = pairwise_sum(weights);
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("kde: weights must sum to 1");
}

}  // namespace

KdeConfig KdeConfig::fixed(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("kde: fixed bandwidth must be positive");
  KdeConfig c;
  c.mode = Bandwidth::fixed;
  c.h = h;
  return c;
}

std::vector<double> resolve_bandwidth(const PointCloud& points, std::span<const double> weights,
                                      const KdeConfig& cfg) {
  const std::size_t d = points.dim();
  if (cfg.mode == KdeConfig::Bandwidth::fixed) {
    if (!(cfg.h > 0.0)) throw ConfigError("kde: fixed bandwidth must be positive");
    return std::vector<double>(d, cfg.h);
  }
  const std::size_t n = points.size();
  double sum_w2 = 0.0;
  for (double w : weights) sum_w2 += w * w;
  const double n_eff = 1.0 / sum_w2;
  const double factor =
      std::pow(4.0 / ((static_cast<double>(d) + 2.0) * n_eff), 1.0 / (static_cast<double>(d) + 4.0));
  std::vector<double> h(d);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += weights[i] * points[i][j];
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dv = points[i][j] - mean;
      var += weights[i] * dv * dv;
    }
    const double sd = std::sqrt(var);
    h[j] = sd > 0.0 && std::isfinite(sd) ? sd * factor : 1.0;
  }
  return h;
}

Kde::Kde(PointCloud points, std::vector<double> weights, const KdeConfig& cfg) : points_(std::move(points)) {
  check_weights(points_, weights);
  h_ = resolve_bandwidth(points_, weights, cfg);
  const std::size_t d = points_.dim();
  inv_h2_.resize(d);
  double log_h = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    inv_h2_[j] = 1.0 / (h_[j] * h_[j]);
    log_h += std::log(h_[j]);
  }
  log_norm_ = cfg.unscaled_constant ? -0.5 * kLog2Pi : -0.5 * static_cast<double>(d) * kLog2Pi - log_h;
  log_w_.resize(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i)
    log_w_[i] = weights[i] > 0.0 ? std::log(weights[i]) : -std::numeric_limits<double>::infinity();
}

double Kde::bandwidth_summary() const {
  double s = 0.0;
  for (double h : h_) s += std::log(h);
  return std::exp(s / static_cast<double>(h_.size()));
}

double Kde::evaluate(PointView x, std::span<double> score_out) const {
  const std::size_t n = points_.size();
  const std::size_t d = points_.dim();
  if (x.size() != d) throw DomainError("kde: query dimension mismatch");
  // exponent of each kernel term, then log-sum-exp
  thread_local std::vector<double> e;
  e.resize(n);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = points_[i];
    double q = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double dv = x[j] - p[j];
      q += dv * dv * inv_h2_[j];
    }
    e[i] = log_w_[i] - 0.5 * q;
    best = std::max(best, e[i]);
  }
  const bool want_score = !score_out.empty();
  if (want_score) std::fill(score_out.begin(), score_out.end(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::exp(e[i] - best);
    total += r;
    if (want_score) {
      const auto p = points_[i];
      for (std::size_t j = 0; j < d; ++j) score_out[j] += r * (p[j] - x[j]);
    }
  }
  if (want_score)
    for (std::size_t j = 0; j < d; ++j) score_out[j] *= inv_h2_[j] / total;
  return log_norm_ + best + std::log(total);
}

double Kde::log_density(PointView x) const { return evaluate(x, {}); }

Point Kde::score(PointView x) const {
  Point s(points_.dim());
  evaluate(x, s);
  return s;
}

double kde_log_density(const PointCloud& points, std::span<const double> weights, const KdeConfig& cfg, PointView x) {
  return Kde(points, {weights.begin(), weights.end()}, cfg).log_density(x);
}

Point kde_score(const PointCloud& points, std::span<const double> weights, const KdeConfig& cfg, PointView x) {
  return Kde(points, {weights.begin(), weights.end()}, cfg).score(x);
}

PooledDensity evaluate_pooled(const DecompositionState& state, const TargetSpec& target, const KdeConfig& cfg,
                              bool with_scores) {
  WeightedSamples pooled = pooled_samples(state);
  const std::size_t m = pooled.points.size();
  const std::size_t d = pooled.points.dim();
  const std::size_t n = state.particles.per_group();
  const std::size_t k = state.particles.groups();
  if (d != target.dim()) throw DomainError("density: particle dimension differs from the target");
  for (std::size_t i = 0; i < m; ++i)
    if (!target.in_support(pooled.points[i]))
      throw DomainError("density: particle " + std::to_string(i % n) + " of group " + std::to_string(i / n) +
                        " lies outside the target support");

  PooledDensity out;
  out.log_mu.resize(m);
  out.log_pi.resize(m);
  if (with_scores) {
    out.score_mu = PointCloud(m, d);
    out.score_pi = PointCloud(m, d);
  }
  const Kde kde(pooled.points, pooled.weights, cfg);
  out.bandwidth = kde.bandwidth();
  out.bandwidth_summary = kde.bandwidth_summary();
  parallel_for(m, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto x = pooled.points[i];
      out.log_mu[i] = kde.evaluate(x, with_scores ? out.score_mu[i] : std::span<double>{});
      out.log_pi[i] = target.log_density(x);
      if (with_scores) {
        const Point s = target.score(x);
        std::copy(s.begin(), s.end(), out.score_pi[i].begin());
      }
    }
  });

  std::vector<double> terms(m), group_terms(n);
  out.kl_grad_weights.resize(k);
  for (std::size_t i = 0; i < m; ++i) terms[i] = pooled.weights[i] * (out.log_mu[i] - out.log_pi[i]);
  out.kl = pairwise_sum(terms);
  for (std::size_t g = 0; g < k; ++g) {
    for (std::size_t i = 0; i < n; ++i) group_terms[i] = out.log_mu[g * n + i] - out.log_pi[g * n + i];
    out.kl_grad_weights[g] = pairwise_sum(group_terms) / static_cast<double>(n) + 1.0;
  }
  if (!std::isfinite(out.kl)) throw NumericalError("density: KL estimate is not finite");
  return out;
}

double kl_estimate(const DecompositionState& state, const TargetSpec& target, const KdeConfig& cfg) {
  return evaluate_pooled(state, target, cfg, false).kl;
}

std::vector<double> kl_grad_weights(const DecompositionState& state, const TargetSpec& target, const KdeConfig& cfg) {
  return evaluate_pooled(state, target, cfg, false).kl_grad_weights;
}

}  // namespace msd
