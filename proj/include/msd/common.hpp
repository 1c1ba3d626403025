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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace msd {

// Error taxonomy. The C API maps each of these onto a status code.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using Point = std::vector<double>;
using PointView = std::span<const double>;

/// N points of dimension d stored row-major.
class PointCloud {
public:
  PointCloud() = default;
  PointCloud(std::size_t n, std::size_t dim) : dim_(dim), data_(n * dim, 0.0) {}
  PointCloud(std::size_t dim, std::vector<double> data);

  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return data_.empty(); }

  PointView operator[](std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<double> operator[](std::size_t i) { return {data_.data() + i * dim_, dim_}; }

  void push_back(PointView p);

  const std::vector<double>& raw() const { return data_; }
  std::vector<double>& raw() { return data_; }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Seedable generator with platform-independent output. std::normal_distribution
/// is implementation-defined, so normals are drawn by Box-Muller from raw
/// 64-bit words.
class Rng {
public:
  static constexpr const char* kAlgorithm = "mt19937_64/box-muller";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  double normal();
  std::uint64_t next_u64() { return engine_(); }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Worker count: MS_THREADS if set and positive, otherwise hardware concurrency.
unsigned worker_count();

/// Runs fn(begin, end) over contiguous chunks of [0, n). Chunk boundaries only
/// depend on n and the worker count, and fn must write disjoint outputs, so the
/// result never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

/// Pairwise (cascade) summation; deterministic for a given input order.
double pairwise_sum(std::span<const double> values);

double dot(PointView a, PointView b);
double squared_norm(PointView a);
bool all_finite(PointView a);

}  // namespace msd
