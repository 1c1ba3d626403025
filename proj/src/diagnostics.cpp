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

#include "msd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace msd {
namespace {

constexpr std::size_t kMaxLatticePoints = 20'000'000;
constexpr std::size_t kMaxStoredViolations = 256;

// Integer offsets o with |o| <= radius_cells.
std::vector<std::vector<int>> ball_offsets(std::size_t d, double radius_cells) {
  const int r = static_cast<int>(std::floor(radius_cells + 1e-9));
  std::vector<std::vector<int>> out;
  std::vector<int> cur(d, -r);
  for (;;) {
    double s = 0.0;
    for (int v : cur) s += static_cast<double>(v) * v;
    if (s <= radius_cells * radius_cells + 1e-9) out.push_back(cur);
    std::size_t j = d;
    while (j > 0 && cur[j - 1] == r) cur[--j] = -r;
    if (j == 0) return out;
    ++cur[j - 1];
  }
}

std::vector<std::size_t> strides(const Lattice& lat) {
  const std::size_t d = lat.counts.size();
  std::vector<std::size_t> s(d, 1);
  for (std::size_t j = d; j-- > 1;) s[j - 1] = s[j] * lat.counts[j];
  return s;
}

Lattice build_lattice(const std::vector<const PointCloud*>& clouds, double pad, double delta, const GridSpec& grid) {
  const std::size_t d = clouds.front()->dim();
  Lattice lat;
  lat.spacing = grid.spacing.value_or(0.5 * delta);
  if (!(lat.spacing > 0.0)) throw ConfigError("support: lattice spacing must be positive");
  if (lat.spacing > 0.5 * delta * (1.0 + 1e-12)) throw ConfigError("support: lattice spacing exceeds delta/2");
  Point lo(d, std::numeric_limits<double>::infinity()), hi(d, -std::numeric_limits<double>::infinity());
  for (const PointCloud* pc : clouds)
    for (std::size_t i = 0; i < pc->size(); ++i)
      for (std::size_t j = 0; j < d; ++j) {
        lo[j] = std::min(lo[j], (*pc)[i][j]);
        hi[j] = std::max(hi[j], (*pc)[i][j]);
      }
  for (std::size_t j = 0; j < d; ++j) {
    lo[j] -= pad;
    hi[j] += pad;
  }
  if (grid.lo) lo = *grid.lo;
  if (grid.hi) hi = *grid.hi;
  if (lo.size() != d || hi.size() != d) throw ConfigError("support: grid bounds have the wrong dimension");
  lat.lo = lo;
  double total = 1.0;
  for (std::size_t j = 0; j < d; ++j) {
    if (!(hi[j] >= lo[j])) throw ConfigError("support: grid upper bound below lower bound");
    const auto c = static_cast<std::size_t>(std::floor((hi[j] - lo[j]) / lat.spacing)) + 1;
    lat.counts.push_back(c);
    total *= static_cast<double>(c);
  }
  if (total > static_cast<double>(kMaxLatticePoints))
    throw ConfigError("support: lattice too large; increase delta or set a coarser grid");
  return lat;
}

void fill_masks(SupportMask& mask, const std::vector<Kde>& kdes) {
  const Lattice& lat = mask.lattice;
  const std::size_t m = lat.size();
  const std::size_t d = lat.counts.size();
  const double log_c = std::log(mask.c);
  const auto st = strides(lat);
  const auto offsets = ball_offsets(d, mask.delta / lat.spacing);

  mask.member.assign(kdes.size(), std::vector<std::uint8_t>(m, 0));
  for (std::size_t g = 0; g < kdes.size(); ++g) {
    std::vector<std::uint8_t> above(m, 0);
    parallel_for(m, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) above[i] = kdes[g].log_density(lat.point(i)) > log_c ? 1 : 0;
    });
    auto& keep = mask.member[g];
    parallel_for(m, [&](std::size_t b, std::size_t e) {
      std::vector<long> idx(d);
      for (std::size_t i = b; i < e; ++i) {
        if (!above[i]) continue;
        std::size_t rest = i;
        for (std::size_t j = 0; j < d; ++j) {
          idx[j] = static_cast<long>(rest / st[j]);
          rest %= st[j];
        }
        bool ok = true;
        for (const auto& off : offsets) {
          std::size_t flat = 0;
          for (std::size_t j = 0; j < d && ok; ++j) {
            const long v = idx[j] + off[j];
            if (v < 0 || v >= static_cast<long>(lat.counts[j])) ok = false;
            else flat += static_cast<std::size_t>(v) * st[j];
          }
          if (!ok || !above[flat]) {
            ok = false;
            break;
          }
        }
        keep[i] = ok ? 1 : 0;
      }
    });
  }
}

std::vector<double> column(const PointCloud& pc, std::size_t axis) {
  std::vector<double> v(pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) v[i] = pc[i][axis];
  return v;
}

DecompositionState make_state(std::vector<PointCloud> groups, std::vector<double> weights) {
  const double floor = std::min(kDefaultWeightFloor, *std::min_element(weights.begin(), weights.end()));
  return DecompositionState{ParticleSet(std::move(groups)), WeightVector(std::move(weights), floor), 0, 0};
}

}  // namespace

std::size_t Lattice::size() const {
  std::size_t s = 1;
  for (std::size_t c : counts) s *= c;
  return counts.empty() ? 0 : s;
}

Point Lattice::point(std::size_t flat) const {
  const std::size_t d = counts.size();
  Point x(d);
  for (std::size_t j = d; j-- > 0;) {
    x[j] = lo[j] + spacing * static_cast<double>(flat % counts[j]);
    flat /= counts[j];
  }
  return x;
}

std::optional<std::size_t> Lattice::nearest(PointView x) const {
  std::size_t flat = 0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    const double r = std::round((x[j] - lo[j]) / spacing);
    if (r < 0.0 || r >= static_cast<double>(counts[j])) return std::nullopt;
    flat = flat * counts[j] + static_cast<std::size_t>(r);
  }
  return flat;
}

SupportMask interior_support(const PointCloud& points, const KdeConfig& cfg, double delta, double c,
                             const GridSpec& grid) {
  return interior_supports(ParticleSet({points}), cfg, delta, c, grid);
}

SupportMask interior_supports(const ParticleSet& particles, const KdeConfig& cfg, double delta, double c,
                              const GridSpec& grid) {
  if (!(delta > 0.0)) throw ConfigError("support: delta must be positive");
  if (!(c > 0.0)) throw ConfigError("support: c must be positive");
  std::vector<Kde> kdes;
  std::vector<const PointCloud*> clouds;
  SupportMask mask;
  mask.delta = delta;
  mask.c = c;
  double pad = 0.0;
  for (std::size_t g = 0; g < particles.groups(); ++g) {
    const PointCloud& pc = particles.group(g);
    const std::vector<double> w(pc.size(), 1.0 / static_cast<double>(pc.size()));
    kdes.emplace_back(pc, w, cfg);
    for (double h : kdes.back().bandwidth()) pad = std::max(pad, 3.0 * h);
    mask.bandwidth.push_back(kdes.back().bandwidth_summary());
    clouds.push_back(&pc);
  }
  mask.lattice = build_lattice(clouds, pad, delta, grid);
  fill_masks(mask, kdes);
  return mask;
}

DisjointnessReport disjointness(const SupportMask& mask) {
  DisjointnessReport r;
  const std::size_t m = mask.lattice.size();
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t hits = 0;
    for (const auto& g : mask.member) hits += g[i];
    if (hits >= 1) ++r.covered;
    if (hits >= 2) ++r.shared;
  }
  r.disjoint = r.shared == 0;
  r.overlap_fraction = r.covered == 0 ? 0.0 : static_cast<double>(r.shared) / static_cast<double>(r.covered);
  return r;
}

DisjointnessReport disjointness_check(const DecompositionState& state, double delta, double c, const KdeConfig& cfg) {
  if (state.particles.groups() < 2) throw ConfigError("disjointness: needs K >= 2");
  return disjointness(interior_supports(state.particles, cfg, delta, c));
}

ConvexReport convex_in_pairs(const SupportMask& mask, std::size_t n_segments, std::uint64_t seed) {
  ConvexReport rep;
  const std::size_t k = mask.member.size();
  if (k < 2) return rep;
  const Lattice& lat = mask.lattice;
  Rng rng(seed);
  for (std::size_t g = 0; g < k; ++g) {
    std::vector<std::size_t> pts;
    for (std::size_t i = 0; i < mask.member[g].size(); ++i)
      if (mask.member[g][i]) pts.push_back(i);
    if (pts.size() < 2) continue;
    for (std::size_t s = 0; s < n_segments; ++s) {
      const Point a = lat.point(pts[rng.below(pts.size())]);
      const Point b = lat.point(pts[rng.below(pts.size())]);
      double len2 = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) len2 += (b[j] - a[j]) * (b[j] - a[j]);
      const auto steps = static_cast<std::size_t>(std::ceil(std::sqrt(len2) / (0.5 * lat.spacing))) + 1;
      Point x(a.size());
      for (std::size_t q = 1; q < steps; ++q) {
        const double t = static_cast<double>(q) / static_cast<double>(steps);
        for (std::size_t j = 0; j < a.size(); ++j) x[j] = a[j] + t * (b[j] - a[j]);
        const auto idx = lat.nearest(x);
        if (!idx) continue;
        bool hit = false;
        for (std::size_t o = 0; o < k && !hit; ++o) {
          if (o == g || !mask.member[o][*idx]) continue;
          rep.holds = false;
          if (rep.violations.size() < kMaxStoredViolations) rep.violations.push_back({g, o, lat.point(*idx)});
          hit = true;
        }
        if (hit) break;
      }
    }
  }
  return rep;
}

ConvexReport convex_in_pairs_check(const DecompositionState& state, double delta, double c, const KdeConfig& cfg,
                                   std::size_t n_segments, std::uint64_t seed) {
  if (state.particles.groups() < 2) return {};
  return convex_in_pairs(interior_supports(state.particles, cfg, delta, c), n_segments, seed);
}

double default_delta(const DecompositionState& state) {
  const WeightedSamples pooled = pooled_samples(state);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < pooled.points.dim(); ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < pooled.points.size(); ++i) mean += pooled.weights[i] * pooled.points[i][j];
    for (std::size_t i = 0; i < pooled.points.size(); ++i)
      var += pooled.weights[i] * (pooled.points[i][j] - mean) * (pooled.points[i][j] - mean);
    best = std::min(best, std::sqrt(var));
  }
  return best > 0.0 ? 0.1 * best : 0.1;
}

std::vector<double> win_rate_curve(std::span<const double> opponents, std::span<const double> grid) {
  if (opponents.empty()) throw ConfigError("win rate: needs at least one opponent");
  for (double y : opponents)
    if (!(y > 0.0)) throw DomainError("win rate: skill levels must be positive");
  std::vector<double> out(grid.size());
  std::vector<double> terms(opponents.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    if (!(x > 0.0)) throw DomainError("win rate: skill levels must be positive");
    for (std::size_t j = 0; j < opponents.size(); ++j) terms[j] = x / (x + opponents[j]);
    out[i] = pairwise_sum(terms) / static_cast<double>(opponents.size());
  }
  return out;
}

DecompositionState baseline_parallel_slices(const PointCloud& samples, std::size_t k, std::size_t axis) {
  if (k == 0) throw ConfigError("slices: K must be at least 1");
  if (axis >= samples.dim()) throw ConfigError("slices: axis out of range");
  const std::size_t n = samples.size() / k;
  if (n == 0) throw ConfigError("slices: fewer samples than groups");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return samples[a][axis] < samples[b][axis]; });
  std::vector<PointCloud> groups;
  for (std::size_t g = 0; g < k; ++g) {
    PointCloud pc(n, samples.dim());
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = samples[order[g * n + i]];
      std::copy(src.begin(), src.end(), pc[i].begin());
    }
    groups.push_back(std::move(pc));
  }
  return make_state(std::move(groups), std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

double quantile_boundary(const PointCloud& samples, double w1) {
  if (samples.dim() != 1) throw ConfigError("quantile split: samples must be one-dimensional");
  if (!(w1 > 0.0 && w1 < 1.0)) throw ConfigError("quantile split: w1 must lie in (0, 1)");
  std::vector<double> v = column(samples, 0);
  std::sort(v.begin(), v.end());
  const auto n1 = static_cast<std::size_t>(std::llround(w1 * static_cast<double>(v.size())));
  if (n1 == 0 || n1 >= v.size()) throw ConfigError("quantile split: too few samples for this split");
  return 0.5 * (v[n1 - 1] + v[n1]);
}

DecompositionState baseline_quantile_split(const PointCloud& samples, double w1) {
  quantile_boundary(samples, w1);  // validates
  std::vector<double> v = column(samples, 0);
  std::sort(v.begin(), v.end());
  const auto n1 = static_cast<std::size_t>(std::llround(w1 * static_cast<double>(v.size())));
  const std::size_t n2 = v.size() - n1;
  const std::size_t n = std::min(n1, n2);
  auto thin = [&](std::size_t begin, std::size_t count) {
    PointCloud pc(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>((static_cast<double>(i) + 0.5) * static_cast<double>(count) /
                                              static_cast<double>(n));
      pc[i][0] = v[begin + std::min(j, count - 1)];
    }
    return pc;
  };
  std::vector<PointCloud> groups;
  groups.push_back(thin(0, n1));
  groups.push_back(thin(n1, n2));
  return make_state(std::move(groups), {w1, 1.0 - w1});
}

DecompositionState baseline_grand_league(const PointCloud& samples) {
  if (samples.size() == 0) throw ConfigError("grand league: needs samples");
  return make_state({samples}, {1.0});
}

double discrete_objective(const std::vector<Atom>& atoms, const std::vector<std::vector<double>>& components,
                          const std::vector<double>& weights, const KernelSpec& kern) {
  const std::size_t n = atoms.size();
  std::vector<double> table(n * n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      const double xa = atoms[a].location, xb = atoms[b].location;
      table[a * n + b] = kern.eval(PointView(&xa, 1), PointView(&xb, 1));
    }
  double total = 0.0;
  for (std::size_t g = 0; g < components.size(); ++g) {
    double l = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) l += components[g][a] * components[g][b] * table[a * n + b];
    total += weights[g] * l;
  }
  return total;
}

DiscreteDecomposition brute_force_discrete(const std::vector<Atom>& atoms, std::size_t k,
                                           const std::vector<double>& weights, const KernelSpec& kern,
                                           double grid_step) {
  if (atoms.empty() || atoms.size() > 5) throw ConfigError("brute force: between 1 and 5 atoms are supported");
  if (k == 0 || k > 3) throw ConfigError("brute force: K must be 1, 2 or 3");
  if (weights.size() != k) throw ConfigError("brute force: one weight per group is required");
  if (!(grid_step > 0.0)) throw ConfigError("brute force: grid step must be positive");
  auto units = [&](double v, const char* what) {
    const double r = std::round(v / grid_step);
    if (std::abs(r * grid_step - v) > 1e-9 || r < 0.0)
      throw ConfigError(std::string("brute force: grid step does not divide every ") + what);
    return static_cast<int>(r);
  };
  const std::size_t na = atoms.size();
  std::vector<int> mass(na), quota(k);
  int total_mass = 0, total_quota = 0;
  for (std::size_t a = 0; a < na; ++a) total_mass += mass[a] = units(atoms[a].mass, "atom mass");
  for (std::size_t g = 0; g < k; ++g) {
    quota[g] = units(weights[g], "weight");
    if (quota[g] == 0) throw ConfigError("brute force: weights must be positive");
    total_quota += quota[g];
  }
  if (total_mass != total_quota) throw ConfigError("brute force: atom masses and weights do not both sum to 1");

  std::vector<std::vector<int>> alloc(k, std::vector<int>(na, 0));
  std::vector<int> remaining = mass;
  DiscreteDecomposition best;
  best.objective = std::numeric_limits<double>::infinity();
  bool found = false;

  auto evaluate = [&]() {
    std::vector<std::vector<double>> comp(k, std::vector<double>(na));
    for (std::size_t g = 0; g < k; ++g)
      for (std::size_t a = 0; a < na; ++a)
        comp[g][a] = static_cast<double>(alloc[g][a]) / static_cast<double>(quota[g]);
    const double obj = discrete_objective(atoms, comp, weights, kern);
    if (!found || obj < best.objective) {
      best.objective = obj;
      best.components = std::move(comp);
      found = true;
    }
  };

  // Group g takes q units from atom a; atoms in order, ascending counts.
  std::function<void(std::size_t, std::size_t, int)> fill = [&](std::size_t g, std::size_t a, int left) {
    if (g + 1 == k) {
      for (std::size_t b = 0; b < na; ++b) alloc[g][b] = remaining[b];
      evaluate();
      return;
    }
    if (a == na) {
      if (left == 0) fill(g + 1, 0, quota[g + 1]);
      return;
    }
    const int cap = std::min(remaining[a], left);
    for (int q = 0; q <= cap; ++q) {
      alloc[g][a] = q;
      remaining[a] -= q;
      fill(g, a + 1, left - q);
      remaining[a] += q;
    }
    alloc[g][a] = 0;
  };
  fill(0, 0, quota[0]);
  if (!found) throw ConfigError("brute force: no feasible allocation on this grid");
  return best;
}

double elo_bulk_tail_crossover() {
  // bulk/tail objective 1/(16 a^2) minus adjacent split 1/(16 (2a-1)^2) + 1/(16 (2a+1)^2)
  auto gap = [](double a) {
    return 1.0 / (a * a) - 1.0 / ((2 * a - 1) * (2 * a - 1)) - 1.0 / ((2 * a + 1) * (2 * a + 1));
  };
  double lo = 1.0, hi = 100.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace msd
