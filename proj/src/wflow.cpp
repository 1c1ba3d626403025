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

#include "msd/wflow.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace msd {
namespace {

void require_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("flow.") + field + " must be positive");
}

// Shared by both modes: particle velocities for a given lambda.
struct ParticleTerms {
  PooledDensity density;
  std::vector<PointCloud> loss_grad;  // p_k grad L(mu_k)
  std::vector<PointCloud> score_gap;  // p_k (s_mu - s_pi)
  double cross = 0.0;                 // sum_k mean_i <loss_grad, score_gap>
  double gap_sq = 0.0;                // sum_k mean_i |score_gap|^2
};

ParticleTerms particle_terms(const DecompositionState& state, const KernelSpec& kern, const TargetSpec& target,
                             const FlowConfig& cfg) {
  validate(state);
  const auto& ps = state.particles;
  const std::size_t k = ps.groups(), n = ps.per_group(), d = ps.dim();
  ParticleTerms t;
  t.density = evaluate_pooled(state, target, cfg.kde, true);
  t.loss_grad.reserve(k);
  t.score_gap.reserve(k);
  std::vector<double> cross_terms(n), gap_terms(n), cross_groups(k), gap_groups(k);
  for (std::size_t g = 0; g < k; ++g) {
    const double p = state.weights[g];
    PointCloud lg = grad_L_field(kern, ps.group(g));
    PointCloud sg(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t row = g * n + i;
      double c = 0.0, s2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        lg[i][j] *= p;
        sg[i][j] = p * (t.density.score_mu[row][j] - t.density.score_pi[row][j]);
        c += lg[i][j] * sg[i][j];
        s2 += sg[i][j] * sg[i][j];
      }
      cross_terms[i] = c;
      gap_terms[i] = s2;
    }
    cross_groups[g] = pairwise_sum(cross_terms) / static_cast<double>(n);
    gap_groups[g] = pairwise_sum(gap_terms) / static_cast<double>(n);
    t.loss_grad.push_back(std::move(lg));
    t.score_gap.push_back(std::move(sg));
  }
  t.cross = pairwise_sum(cross_groups);
  t.gap_sq = pairwise_sum(gap_groups);
  return t;
}

VelocityField assemble(const DecompositionState& state, ParticleTerms& t, double lambda, double denom) {
  const std::size_t k = state.particles.groups(), n = state.particles.per_group(), d = state.particles.dim();
  VelocityField vel;
  vel.lambda = lambda;
  vel.lambda_denominator = denom;
  vel.kl = t.density.kl;
  vel.bandwidth = t.density.bandwidth_summary;
  vel.weight_velocity.assign(k, 0.0);
  vel.phi.reserve(k);
  std::vector<double> norms(n), groups(k);
  for (std::size_t g = 0; g < k; ++g) {
    PointCloud phi(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        phi[i][j] = -(t.loss_grad[g][i][j] + lambda * t.score_gap[g][i][j]);
        s += phi[i][j] * phi[i][j];
      }
      norms[i] = s;
    }
    groups[g] = pairwise_sum(norms) / static_cast<double>(n);
    vel.phi.push_back(std::move(phi));
  }
  vel.phi_norm = pairwise_sum(groups);
  return vel;
}

double guarded(double x, double step, PositivityGuard guard) {
  switch (guard) {
    case PositivityGuard::none:
      return x + step;
    case PositivityGuard::reflect: {
      const double y = std::abs(x + step);
      return y > 0.0 ? y : 0.5 * x;
    }
    case PositivityGuard::log_domain:
      return x * std::exp(step / x);
  }
  return x + step;
}

ParticleSet move_particles(const DecompositionState& state, const VelocityField& vel, double eta,
                           PositivityGuard guard) {
  const auto& ps = state.particles;
  if (vel.phi.size() != ps.groups()) throw ConfigError("step: velocity field does not match the state");
  std::vector<PointCloud> groups;
  groups.reserve(ps.groups());
  for (std::size_t g = 0; g < ps.groups(); ++g) {
    PointCloud next = ps.group(g);
    auto& raw = next.raw();
    const auto& v = vel.phi[g].raw();
    if (v.size() != raw.size()) throw ConfigError("step: velocity field does not match the state");
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = guarded(raw[i], eta * v[i], guard);
    groups.push_back(std::move(next));
  }
  return ParticleSet(std::move(groups));
}

std::vector<double> group_losses(const DecompositionState& state, const KernelSpec& kern) {
  std::vector<double> out(state.particles.groups());
  for (std::size_t g = 0; g < out.size(); ++g) out[g] = loss_estimate(kern, state.particles.group(g));
  return out;
}

}  // namespace

void FlowConfig::validate() const {
  require_positive(alpha, "alpha");
  if (eta < 0.0 || !std::isfinite(eta)) throw ConfigError("flow.eta must be positive");
  if (eta2 < 0.0 || !std::isfinite(eta2)) throw ConfigError("flow.eta2 must be positive");
  require_positive(denom_floor, "denom_floor");
  require_positive(p_floor, "p_floor");
  if (mode == FlowMode::dynamic_weights) {
    require_positive(theta, "theta");
    require_positive(beta, "beta");
  } else {
    if (theta < 0.0) throw ConfigError("flow.theta must be non-negative");
    if (beta < 0.0) throw ConfigError("flow.beta must be non-negative");
  }
  if (kde.mode == KdeConfig::Bandwidth::fixed) require_positive(kde.h, "bandwidth");
}

PositivityGuard FlowConfig::resolved_guard(const KernelSpec& kern) const {
  if (guard) return *guard;
  return kern.kind() == KernelSpec::Kind::elo ? PositivityGuard::reflect : PositivityGuard::none;
}

double default_eta(const DecompositionState& state, const KernelSpec& kern) {
  const WeightedSamples pooled = pooled_samples(state);
  const std::size_t d = pooled.points.dim();
  double min_var = INFINITY;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < pooled.points.size(); ++i) mean += pooled.weights[i] * pooled.points[i][j];
    double var = 0.0;
    for (std::size_t i = 0; i < pooled.points.size(); ++i) {
      const double dv = pooled.points[i][j] - mean;
      var += pooled.weights[i] * dv * dv;
    }
    min_var = std::min(min_var, var);
  }
  double eta = min_var > 0.0 ? 0.05 * min_var : 0.05;
  if (kern.kind() == KernelSpec::Kind::variance) {
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
        kern.w().data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    const double spectral = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(w).eigenvalues().cwiseAbs().maxCoeff();
    if (spectral > 0.0) eta = std::min(eta, 0.1 / (4.0 * spectral));
  }
  return eta;
}

std::vector<double> project_simplex_tangent(std::span<const double> v) {
  if (v.empty()) throw ConfigError("projection: K must be at least 1");
  const double mean = pairwise_sum(v) / static_cast<double>(v.size());
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x -= mean;
  return out;
}

VelocityField velocity_fixed(const DecompositionState& state, const KernelSpec& kern, const TargetSpec& target,
                             const FlowConfig& cfg) {
  ParticleTerms t = particle_terms(state, kern, target, cfg);
  const double denom = std::max(t.gap_sq, cfg.denom_floor);
  const double lambda = (-t.cross + cfg.alpha * std::max(t.density.kl, 0.0)) / denom;
  VelocityField vel = assemble(state, t, lambda, denom);
  vel.group_loss = group_losses(state, kern);
  return vel;
}

VelocityField velocity_dynamic(const DecompositionState& state, const KernelSpec& kern, const TargetSpec& target,
                               const FlowConfig& cfg) {
  const std::size_t k = state.particles.groups();
  for (std::size_t g = 0; g < k; ++g)
    if (state.weights[g] < cfg.p_floor) throw ConfigError("dynamic flow: weight below p_floor");
  ParticleTerms t = particle_terms(state, kern, target, cfg);
  const std::vector<double> loss = group_losses(state, kern);
  std::vector<double> grad_f(k);
  for (std::size_t g = 0; g < k; ++g)
    grad_f[g] = loss[g] - cfg.theta * cfg.beta / std::pow(state.weights[g], cfg.beta + 1.0);
  const std::vector<double> pf = project_simplex_tangent(grad_f);
  const std::vector<double> pkl = project_simplex_tangent(t.density.kl_grad_weights);
  std::vector<double> cross_w(k), sq_w(k);
  for (std::size_t g = 0; g < k; ++g) {
    cross_w[g] = pf[g] * pkl[g];
    sq_w[g] = pkl[g] * pkl[g];
  }
  const double denom = std::max(t.gap_sq + pairwise_sum(sq_w), cfg.denom_floor);
  const double lambda = (-(t.cross + pairwise_sum(cross_w)) + cfg.alpha * std::max(t.density.kl, 0.0)) / denom;
  VelocityField vel = assemble(state, t, lambda, denom);
  std::vector<double> raw(k);
  for (std::size_t g = 0; g < k; ++g) raw[g] = -(grad_f[g] + lambda * t.density.kl_grad_weights[g]);
  vel.weight_velocity = project_simplex_tangent(raw);
  double v2 = 0.0;
  for (double v : vel.weight_velocity) v2 += v * v;
  vel.phi_norm += v2;
  vel.group_loss = loss;
  return vel;
}

DecompositionState step_fixed(const DecompositionState& state, const VelocityField& vel, double eta,
                              PositivityGuard guard) {
  DecompositionState next{move_particles(state, vel, eta, guard), state.weights, state.iteration + 1,
                          state.rng_seed};
  return next;
}

DecompositionState step_dynamic(const DecompositionState& state, const VelocityField& vel, double eta, double eta2,
                                double p_floor, PositivityGuard guard) {
  const std::size_t k = state.weights.size();
  if (vel.weight_velocity.size() != k) throw ConfigError("step: weight velocity does not match the state");
  std::vector<double> q(k);
  std::vector<bool> clamped(k, false);
  for (std::size_t g = 0; g < k; ++g) {
    q[g] = state.weights[g] + eta2 * vel.weight_velocity[g];
    if (!std::isfinite(q[g])) throw NumericalError("step: non-finite weight");
    if (q[g] <= p_floor) {
      q[g] = p_floor;
      clamped[g] = true;
    }
  }
  const double excess = std::accumulate(q.begin(), q.end(), 0.0) - 1.0;
  double slack = 0.0;
  for (std::size_t g = 0; g < k; ++g)
    if (!clamped[g]) slack += q[g] - p_floor;
  if (excess != 0.0 && slack > 0.0)
    for (std::size_t g = 0; g < k; ++g)
      if (!clamped[g]) q[g] -= excess * (q[g] - p_floor) / slack;
  const double total = std::accumulate(q.begin(), q.end(), 0.0);
  for (double& v : q) v = std::max(v / total, p_floor);
  DecompositionState next{move_particles(state, vel, eta, guard), WeightVector(std::move(q), p_floor),
                          state.iteration + 1, state.rng_seed};
  return next;
}

double objective(const DecompositionState& state, const KernelSpec& kern, FlowMode mode, double theta, double beta) {
  double acc = 0.0;
  for (std::size_t g = 0; g < state.particles.groups(); ++g) {
    acc += state.weights[g] * loss_estimate(kern, state.particles.group(g));
    if (mode == FlowMode::dynamic_weights) acc += theta / std::pow(state.weights[g], beta);
  }
  return acc;
}

RunRecord run_flow(DecompositionState initial, const TargetSpec& target, const KernelSpec& kern,
                   const FlowConfig& cfg_in, const StateObserver& observer) {
  FlowConfig cfg = cfg_in;
  cfg.validate();
  validate(initial);
  if (cfg.mode == FlowMode::dynamic_weights && initial.weights.floor() < cfg.p_floor)
    initial.weights = WeightVector(initial.weights.values(), cfg.p_floor);
  if (cfg.eta == 0.0) cfg.eta = default_eta(initial, kern);
  if (cfg.eta2 == 0.0) cfg.eta2 = 0.1 * cfg.eta;
  const PositivityGuard guard = cfg.resolved_guard(kern);
  const bool dynamic = cfg.mode == FlowMode::dynamic_weights;

  RunRecord rec;
  rec.eta = cfg.eta;
  rec.eta2 = cfg.eta2;
  rec.seed = initial.rng_seed;
  DecompositionState state = std::move(initial);
  for (std::size_t t = 0;; ++t) {
    VelocityField vel;
    try {
      vel = dynamic ? velocity_dynamic(state, kern, target, cfg) : velocity_fixed(state, kern, target, cfg);
      if (!std::isfinite(vel.lambda) || !std::isfinite(vel.phi_norm))
        throw NumericalError("non-finite velocity field");
    } catch (const std::exception& e) {
      if (t == 0 || dynamic_cast<const ConfigError*>(&e)) throw;
      rec.failed_at = t;
      rec.failure = e.what();
      break;
    }
    double obj = 0.0;
    for (std::size_t g = 0; g < vel.group_loss.size(); ++g) {
      obj += state.weights[g] * vel.group_loss[g];
      if (dynamic) obj += cfg.theta / std::pow(state.weights[g], cfg.beta);
    }
    rec.kl.push_back(vel.kl);
    rec.objective.push_back(obj);
    rec.lambda.push_back(vel.lambda);
    rec.phi_norm.push_back(vel.phi_norm);
    rec.bandwidth.push_back(vel.bandwidth);
    rec.weights.push_back(state.weights.values());
    if (observer) observer(state);
    if (t == cfg.iterations) break;
    try {
      state = dynamic ? step_dynamic(state, vel, cfg.eta, cfg.eta2, cfg.p_floor, guard)
                      : step_fixed(state, vel, cfg.eta, guard);
    } catch (const std::exception& e) {
      rec.failed_at = t + 1;
      rec.failure = e.what();
      break;
    }
  }
  rec.final_state = std::move(state);
  return rec;
}

RunRecord run_fixed(const TargetSpec& target, const KernelSpec& kern, std::size_t k, std::size_t n,
                    const std::vector<double>& weights, FlowConfig cfg, std::uint64_t seed,
                    const StateObserver& observer) {
  cfg.mode = FlowMode::fixed_weights;
  const double floor = std::min(cfg.p_floor, *std::min_element(weights.begin(), weights.end()));
  return run_flow(init_from_target(target, k, n, seed, weights, floor), target, kern, cfg, observer);
}

RunRecord run_dynamic(const TargetSpec& target, const KernelSpec& kern, std::size_t k, std::size_t n, FlowConfig cfg,
                      std::uint64_t seed, const StateObserver& observer) {
  cfg.mode = FlowMode::dynamic_weights;
  return run_flow(init_from_target(target, k, n, seed, std::nullopt, std::min(cfg.p_floor, 1.0 / k)), target, kern,
                  cfg, observer);
}

}  // namespace msd
