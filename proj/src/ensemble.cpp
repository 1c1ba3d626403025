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

#include "msd/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace msd {

ParticleSet::ParticleSet(std::vector<PointCloud> groups) : groups_(std::move(groups)) {
  if (groups_.empty()) throw ConfigError("ParticleSet: K must be at least 1");
  const std::size_t n = groups_.front().size();
  const std::size_t d = groups_.front().dim();
  if (n == 0) throw ConfigError("ParticleSet: N must be at least 1");
  for (const auto& g : groups_)
    if (g.size() != n || g.dim() != d) throw ConfigError("ParticleSet: groups must share N and d");
}

WeightVector::WeightVector(std::vector<double> p, double floor) : p_(std::move(p)), floor_(floor) {
  if (p_.empty()) throw ConfigError("weights: K must be at least 1");
  if (!(floor_ > 0.0) || floor_ * static_cast<double>(p_.size()) > 1.0)
    throw ConfigError("weights: floor must be positive and at most 1/K");
  const double total = std::accumulate(p_.begin(), p_.end(), 0.0);
  if (std::abs(total - 1.0) > kSimplexTolerance)
    throw ConfigError("weights: must sum to 1 (got " + std::to_string(total) + ")");
  for (double v : p_)
    if (!(v >= floor_) || !std::isfinite(v))
      throw ConfigError("weights: every weight must be at least the floor " + std::to_string(floor_));
}

WeightVector WeightVector::equal(std::size_t k, double floor) {
  if (k == 0) throw ConfigError("weights: K must be at least 1");
  return WeightVector(std::vector<double>(k, 1.0 / static_cast<double>(k)), std::min(floor, 1.0 / static_cast<double>(k)));
}

void validate(const DecompositionState& state) {
  if (state.weights.size() != state.particles.groups())
    throw ConfigError("state: weight count differs from group count");
  for (std::size_t k = 0; k < state.particles.groups(); ++k) {
    const auto& g = state.particles.group(k);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!all_finite(g[i]))
        throw NumericalError("state: non-finite coordinate in group " + std::to_string(k) + ", particle " +
                             std::to_string(i));
  }
}

DecompositionState init_from_target(const TargetSpec& target, std::size_t k, std::size_t n, std::uint64_t seed,
                                    const std::optional<std::vector<double>>& weights, double weight_floor) {
  if (k == 0) throw ConfigError("init: K must be at least 1");
  if (n == 0) throw ConfigError("init: N must be at least 1");
  WeightVector w = weights ? WeightVector(*weights, weight_floor) : WeightVector::equal(k, weight_floor);
  if (w.size() != k) throw ConfigError("init: explicit weights must have K entries");
  Rng rng(seed);
  std::vector<PointCloud> groups;
  groups.reserve(k);
  for (std::size_t g = 0; g < k; ++g) {
    PointCloud pc(n, target.dim());
    for (std::size_t i = 0; i < n; ++i) target.draw(rng, pc[i]);
    groups.push_back(std::move(pc));
  }
  return DecompositionState{ParticleSet(std::move(groups)), std::move(w), 0, seed};
}

void rescale_about_mean(DecompositionState& state, double spread) {
  if (!(spread > 0.0)) throw ConfigError("init: spread must be positive");
  auto& ps = state.particles;
  Point mean(ps.dim(), 0.0);
  for (std::size_t k = 0; k < ps.groups(); ++k) {
    const double w = state.weights[k] / static_cast<double>(ps.per_group());
    for (std::size_t i = 0; i < ps.per_group(); ++i)
      for (std::size_t j = 0; j < ps.dim(); ++j) mean[j] += w * ps.group(k)[i][j];
  }
  for (std::size_t k = 0; k < ps.groups(); ++k)
    for (std::size_t i = 0; i < ps.per_group(); ++i) {
      auto x = ps.group(k)[i];
      for (std::size_t j = 0; j < ps.dim(); ++j) x[j] = mean[j] + spread * (x[j] - mean[j]);
    }
}

DecompositionState init_swap_refined(const TargetSpec& target, const KernelSpec& kern, std::size_t k, std::size_t n,
                                     std::uint64_t seed, const std::optional<std::vector<double>>& weights,
                                     double weight_floor, const SwapInitOptions& opts) {
  if (k == 0) throw ConfigError("init: K must be at least 1");
  if (n == 0) throw ConfigError("init: N must be at least 1");
  WeightVector w = weights ? WeightVector(*weights, weight_floor) : WeightVector::equal(k, weight_floor);
  if (w.size() != k) throw ConfigError("init: explicit weights must have K entries");
  const double p_min = *std::min_element(w.values().begin(), w.values().end());
  std::vector<std::size_t> sizes(k);
  std::size_t m = 0;
  for (std::size_t g = 0; g < k; ++g) {
    sizes[g] = static_cast<std::size_t>(std::llround(static_cast<double>(n) * w[g] / p_min));
    m += sizes[g];
  }
  if (m > 20000) throw ConfigError("init: swap refinement pool too large; lower N or balance the weights");
  const PointCloud pool = sample(target, m, seed);
  auto ell = [&](std::size_t i, std::size_t j) { return kern.eval(pool[i], pool[j]); };
  std::vector<double> scale(k);
  for (std::size_t g = 0; g < k; ++g)
    scale[g] = w[g] / (static_cast<double>(sizes[g]) * static_cast<double>(sizes[g]));

  // Greedy best-swap descent from a labelling; returns the objective reached.
  auto refine = [&](std::vector<std::size_t>& label) {
    // row[g][i] = sum over members j of g of l(x_i, x_j); quad[g] = sum of row[g] over members
    std::vector<std::vector<double>> row(k, std::vector<double>(m, 0.0));
    parallel_for(m, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i)
        for (std::size_t j = 0; j < m; ++j) row[label[j]][i] += ell(i, j);
    });
    std::vector<double> quad(k, 0.0);
    for (std::size_t i = 0; i < m; ++i) quad[label[i]] += row[label[i]][i];
    auto total = [&] {
      double f = 0.0;
      for (std::size_t g = 0; g < k; ++g) f += scale[g] * quad[g];
      return f;
    };
    for (std::size_t sweep = 0; sweep < opts.sweeps; ++sweep) {
      std::size_t swaps = 0;
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t a = label[i];
        const double lii = ell(i, i);
        double best = 0.0, best_da = 0.0, best_db = 0.0;
        std::size_t best_j = m;
        for (std::size_t j = 0; j < m; ++j) {
          const std::size_t b = label[j];
          if (b == a) continue;
          const double lij = ell(i, j), ljj = ell(j, j);
          // i leaves a and j joins it; j leaves b and i joins it
          const double da = -2.0 * row[a][i] + lii + 2.0 * (row[a][j] - lij) + ljj;
          const double db = -2.0 * row[b][j] + ljj + 2.0 * (row[b][i] - lij) + lii;
          const double delta = scale[a] * da + scale[b] * db;
          if (delta < best) {
            best = delta;
            best_da = da;
            best_db = db;
            best_j = j;
          }
        }
        if (best_j == m || best >= -1e-13 * std::abs(total())) continue;
        const std::size_t j = best_j, b = label[j];
        quad[a] += best_da;
        quad[b] += best_db;
        for (std::size_t q = 0; q < m; ++q) {
          const double li = ell(q, i), lj = ell(q, j);
          row[a][q] += lj - li;
          row[b][q] += li - lj;
        }
        label[i] = b;
        label[j] = a;
        ++swaps;
      }
      if (swaps == 0) break;
    }
    return total();
  };

  auto blocks = [&](const std::vector<std::size_t>& order, const std::vector<std::size_t>& group_order) {
    std::vector<std::size_t> label(m);
    std::size_t pos = 0;
    for (std::size_t g : group_order)
      for (std::size_t c = 0; c < sizes[g]; ++c) label[order[pos++]] = g;
    return label;
  };

  std::vector<std::size_t> identity(m), groups_fwd(k);
  std::iota(identity.begin(), identity.end(), 0);
  std::iota(groups_fwd.begin(), groups_fwd.end(), 0);
  const std::vector<std::size_t> groups_rev(groups_fwd.rbegin(), groups_fwd.rend());
  auto radial = [&](PointView c, const std::vector<std::size_t>& group_order) {
    if (c.size() != pool.dim()) throw ConfigError("init: centre has the wrong dimension");
    std::vector<double> dist(m);
    for (std::size_t i = 0; i < m; ++i) {
      double s2 = 0.0;
      for (std::size_t j = 0; j < pool.dim(); ++j) s2 += (pool[i][j] - c[j]) * (pool[i][j] - c[j]);
      dist[i] = s2;
    }
    std::vector<std::size_t> order = identity;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return dist[x] < dist[y]; });
    return blocks(order, group_order);
  };

  std::vector<std::size_t> best_label;
  if (opts.centre) {
    best_label = radial(*opts.centre, opts.reverse ? groups_rev : groups_fwd);
    refine(best_label);
  } else {
    best_label = blocks(identity, groups_fwd);
    double best_f = refine(best_label);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (std::size_t r = 0; r < opts.restarts && k > 1; ++r) {
      const auto centre = pool[rng.below(m)];
      for (const std::vector<std::size_t>* go : {static_cast<const std::vector<std::size_t>*>(&groups_fwd), &groups_rev}) {
        std::vector<std::size_t> label = radial(centre, *go);
        const double f = refine(label);
        if (f < best_f) {
          best_f = f;
          best_label = std::move(label);
        }
      }
    }
  }

  std::vector<PointCloud> groups;
  for (std::size_t g = 0; g < k; ++g) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < m; ++i)
      if (best_label[i] == g) members.push_back(i);
    if (pool.dim() == 1)
      std::stable_sort(members.begin(), members.end(),
                       [&](std::size_t x, std::size_t y) { return pool[x][0] < pool[y][0]; });
    PointCloud pc(n, pool.dim());
    for (std::size_t i = 0; i < n; ++i) {
      const auto pick = static_cast<std::size_t>((static_cast<double>(i) + 0.5) *
                                                 static_cast<double>(members.size()) / static_cast<double>(n));
      const auto src = pool[members[std::min(pick, members.size() - 1)]];
      std::copy(src.begin(), src.end(), pc[i].begin());
    }
    groups.push_back(std::move(pc));
  }
  return DecompositionState{ParticleSet(std::move(groups)), std::move(w), 0, seed};
}

WeightedSamples pooled_samples(const DecompositionState& state) {
  const auto& ps = state.particles;
  const std::size_t n = ps.per_group();
  WeightedSamples out;
  out.points = PointCloud(ps.groups() * n, ps.dim());
  out.weights.resize(ps.groups() * n);
  std::size_t row = 0;
  for (std::size_t k = 0; k < ps.groups(); ++k) {
    const double w = state.weights[k] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i, ++row) {
      auto dst = out.points[row];
      auto src = ps.group(k)[i];
      std::copy(src.begin(), src.end(), dst.begin());
      out.weights[row] = w;
    }
  }
  return out;
}

}  // namespace msd
