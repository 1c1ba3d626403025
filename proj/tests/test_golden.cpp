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

#include <algorithm>
#include <filesystem>
#include <utility>

#include "doctest.h"
#include "msd/runner.hpp"

namespace fs = std::filesystem;
using namespace msd;

namespace {

app::RunConfig bundled(const std::string& name) {
  const auto cfg = app::load_config((fs::path(MSD_CONFIG_DIR) / (name + ".cfg")).string());
  return app::with_override(cfg, "output", "dir", (fs::temp_directory_path() / ("msd_golden_" + name)).string());
}

/// Running minimum of phi_norm at iteration 10 over its value at T.
double residual_drop(const RunRecord& r) {
  const double early = *std::min_element(r.phi_norm.begin(), r.phi_norm.begin() + 11);
  const double late = *std::min_element(r.phi_norm.begin(), r.phi_norm.end());
  return early / late;
}

}  // namespace

TEST_CASE("every bundled config parses") {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(MSD_CONFIG_DIR)) {
    if (e.path().extension() != ".cfg") continue;
    CAPTURE(e.path().string());
    CHECK_NOTHROW(app::load_config(e.path().string()));
    ++n;
  }
  CHECK(n == 11);
}

TEST_CASE("optimality residual falls by an order of magnitude") {
  for (const char* name : {"gaussian2d_multiK", "elo_uniform"}) {
    CAPTURE(name);
    const auto out = app::execute(bundled(name));
    REQUIRE_FALSE(out.failed);
    CHECK(out.record.length() == bundled(name).flow.iterations + 1);
    CHECK(residual_drop(out.record) >= 10.0);
  }
}

TEST_CASE("uniform skill splits at the middle") {
  const auto out = app::execute(bundled("elo_uniform"));
  const auto& s = out.record.final_state;
  auto range = [&](std::size_t k) {
    const auto& v = s.particles.group(k).raw();
    return std::pair{*std::min_element(v.begin(), v.end()), *std::max_element(v.begin(), v.end())};
  };
  auto low = range(0), high = range(1);
  if (low.first > high.first) std::swap(low, high);
  // upper edge of the lower league and lower edge of the upper one
  const double lo = std::min(low.second, high.first), hi = std::max(low.second, high.first);
  CHECK(lo > 17.0);
  CHECK(hi < 23.0);
  CHECK(app::compare(out.out_dir, "grand_league").improvement > 0.5);
}
