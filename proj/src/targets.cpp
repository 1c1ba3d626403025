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

#include "msd/targets.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace msd {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_dim(const TargetSpec& t, PointView x) {
  if (x.size() != t.dim())
    throw DomainError("target: point has dimension " + std::to_string(x.size()) + ", expected " +
                      std::to_string(t.dim()));
}

}  // namespace

TargetSpec TargetSpec::gaussian1d(double mean, double sd) {
  if (!(sd > 0.0) || !std::isfinite(mean)) throw ConfigError("gaussian1d: sd must be positive");
  return TargetSpec(Gaussian1d{mean, sd}, 1);
}

TargetSpec TargetSpec::mvnormal(std::vector<double> mean, std::vector<double> cov) {
  const std::size_t d = mean.size();
  if (d == 0 || cov.size() != d * d) throw ConfigError("mvnormal: covariance must be d x d");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> c(cov.data(), d, d);
  if (!c.isApprox(c.transpose(), 1e-12)) throw ConfigError("mvnormal: covariance is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) throw ConfigError("mvnormal: covariance is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  const Eigen::MatrixXd prec = llt.solve(Eigen::MatrixXd::Identity(d, d));
  MvNormal m;
  m.mean = std::move(mean);
  m.cov = std::move(cov);
  m.chol.resize(d * d);
  m.precision.resize(d * d);
  double log_det = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    log_det += 2.0 * std::log(l(i, i));
    for (std::size_t j = 0; j < d; ++j) {
      m.chol[i * d + j] = l(i, j);
      m.precision[i * d + j] = 0.5 * (prec(i, j) + prec(j, i));
    }
  }
  m.log_norm = -0.5 * (static_cast<double>(d) * kLog2Pi + log_det);
  return TargetSpec(std::move(m), d);
}

TargetSpec TargetSpec::lognormal(double scale, double shape) {
  if (!(shape > 0.0) || !std::isfinite(scale)) throw ConfigError("lognormal: shape must be positive");
  return TargetSpec(Lognormal{scale, shape}, 1);
}

TargetSpec TargetSpec::smoothed_uniform(double a, double b, double sharpness) {
  if (!(a < b)) throw ConfigError("smoothed_uniform: requires a < b");
  const double width = b - a;
  if (!(sharpness > 0.0)) sharpness = 50.0 / width;
  // integral of sigmoid(s(x-a)) sigmoid(s(b-x)) over R equals width / (1 - exp(-s width))
  const double log_mass = std::log(width) - std::log1p(-std::exp(-sharpness * width));
  return TargetSpec(SmoothedUniform{a, b, sharpness, -log_mass}, 1);
}

TargetSpec TargetSpec::mixture(std::vector<std::pair<double, TargetSpec>> components) {
  if (components.empty()) throw ConfigError("mixture: needs at least one component");
  Mixture m;
  double total = 0.0;
  const std::size_t d = components.front().second.dim();
  for (auto& [w, c] : components) {
    if (!(w > 0.0)) throw ConfigError("mixture: weights must be positive");
    if (c.dim() != d) throw ConfigError("mixture: components must share a dimension");
    total += w;
    m.weights.push_back(w);
    m.components.push_back(std::move(c));
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("mixture: weights must sum to 1");
  for (double& w : m.weights) w /= total;
  return TargetSpec(std::move(m), d);
}

std::string TargetSpec::family_name() const {
  return std::visit(overloaded{[](const Gaussian1d&) { return std::string("gaussian1d"); },
                               [](const MvNormal&) { return std::string("mvnormal"); },
                               [](const Lognormal&) { return std::string("lognormal"); },
                               [](const SmoothedUniform&) { return std::string("smoothed_uniform"); },
                               [](const Mixture&) { return std::string("mixture"); }},
                    family_);
}

bool TargetSpec::in_support(PointView x) const {
  if (x.size() != dim_ || !all_finite(x)) return false;
  return std::visit(overloaded{[&](const Lognormal&) { return x[0] > 0.0; },
                               [&](const Mixture& m) {
                                 return std::any_of(m.components.begin(), m.components.end(),
                                                    [&](const TargetSpec& c) { return c.in_support(x); });
                               },
                               [](const auto&) { return true; }},
                    family_);
}

double TargetSpec::log_density(PointView x) const {
  check_dim(*this, x);
  return std::visit(
      overloaded{
          [&](const Gaussian1d& g) {
            const double z = (x[0] - g.mean) / g.sd;
            return -0.5 * kLog2Pi - std::log(g.sd) - 0.5 * z * z;
          },
          [&](const MvNormal& m) {
            const std::size_t d = dim_;
            double q = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
              double row = 0.0;
              for (std::size_t j = 0; j < d; ++j) row += m.precision[i * d + j] * (x[j] - m.mean[j]);
              q += (x[i] - m.mean[i]) * row;
            }
            return m.log_norm - 0.5 * q;
          },
          [&](const Lognormal& l) {
            if (!(x[0] > 0.0)) return kNegInf;
            const double lx = std::log(x[0]);
            const double z = (lx - l.scale) / l.shape;
            return -lx - std::log(l.shape) - 0.5 * kLog2Pi - 0.5 * z * z;
          },
          [&](const SmoothedUniform& u) {
            return u.log_norm - softplus(u.sharpness * (u.a - x[0])) - softplus(u.sharpness * (x[0] - u.b));
          },
          [&](const Mixture& m) {
            double best = kNegInf;
            std::vector<double> terms(m.weights.size());
            for (std::size_t c = 0; c < terms.size(); ++c) {
              terms[c] = std::log(m.weights[c]) + m.components[c].log_density(x);
              best = std::max(best, terms[c]);
            }
            if (best == kNegInf) return kNegInf;
            double s = 0.0;
            for (double t : terms) s += std::exp(t - best);
            return best + std::log(s);
          }},
      family_);
}

Point TargetSpec::score(PointView x) const {
  check_dim(*this, x);
  if (!in_support(x)) throw DomainError("target score: point outside the open support");
  return std::visit(
      overloaded{[&](const Gaussian1d& g) { return Point{-(x[0] - g.mean) / (g.sd * g.sd)}; },
                 [&](const MvNormal& m) {
                   const std::size_t d = dim_;
                   Point s(d, 0.0);
                   for (std::size_t i = 0; i < d; ++i)
                     for (std::size_t j = 0; j < d; ++j) s[i] -= m.precision[i * d + j] * (x[j] - m.mean[j]);
                   return s;
                 },
                 [&](const Lognormal& l) {
                   const double v = x[0];
                   return Point{-1.0 / v - (std::log(v) - l.scale) / (l.shape * l.shape * v)};
                 },
                 [&](const SmoothedUniform& u) {
                   const double s = u.sharpness;
                   return Point{s * (sigmoid(s * (u.a - x[0])) - sigmoid(s * (x[0] - u.b)))};
                 },
                 [&](const Mixture& m) {
                   // responsibility-weighted component scores, stabilised by log-sum-exp
                   const std::size_t nc = m.weights.size();
                   std::vector<double> logr(nc);
                   double best = kNegInf;
                   for (std::size_t c = 0; c < nc; ++c) {
                     logr[c] = std::log(m.weights[c]) + m.components[c].log_density(x);
                     best = std::max(best, logr[c]);
                   }
                   double total = 0.0;
                   for (double& r : logr) {
                     r = std::exp(r - best);
                     total += r;
                   }
                   Point s(dim_, 0.0);
                   for (std::size_t c = 0; c < nc; ++c) {
                     const double r = logr[c] / total;
                     if (r == 0.0) continue;
                     const Point sc = m.components[c].score(x);
                     for (std::size_t j = 0; j < dim_; ++j) s[j] += r * sc[j];
                   }
                   return s;
                 }},
      family_);
}

void TargetSpec::draw(Rng& rng, std::span<double> out) const {
  std::visit(overloaded{[&](const Gaussian1d& g) { out[0] = g.mean + g.sd * rng.normal(); },
                        [&](const MvNormal& m) {
                          const std::size_t d = dim_;
                          std::vector<double> z(d);
                          for (double& v : z) v = rng.normal();
                          for (std::size_t i = 0; i < d; ++i) {
                            double v = m.mean[i];
                            for (std::size_t j = 0; j <= i; ++j) v += m.chol[i * d + j] * z[j];
                            out[i] = v;
                          }
                        },
                        [&](const Lognormal& l) { out[0] = std::exp(l.scale + l.shape * rng.normal()); },
                        [&](const SmoothedUniform& u) {
                          const double p = rng.uniform_open();
                          const double logistic = std::log(p / (1.0 - p)) / u.sharpness;
                          out[0] = u.a + (u.b - u.a) * rng.uniform() + logistic;
                        },
                        [&](const Mixture& m) {
                          const double r = rng.uniform();
                          double acc = 0.0;
                          std::size_t c = 0;
                          for (; c + 1 < m.weights.size(); ++c) {
                            acc += m.weights[c];
                            if (r < acc) break;
                          }
                          m.components[c].draw(rng, out);
                        }},
             family_);
}

PointCloud sample(const TargetSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("sample: n must be at least 1");
  Rng rng(seed);
  PointCloud out(n, spec.dim());
  for (std::size_t i = 0; i < n; ++i) spec.draw(rng, out[i]);
  return out;
}

}  // namespace msd
