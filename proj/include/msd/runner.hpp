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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msd/diagnostics.hpp"
#include "msd/euclid.hpp"
#include "msd/wflow.hpp"

namespace msd::app {

inline constexpr const char* kVersion = "0.1.0";

enum class InitMode { target, swap_refined, radial };

struct DiagnosticsConfig {
  std::optional<double> delta;  // unset: default_delta of the state
  double c = 1e-4;
  KdeConfig kde;
  std::size_t n_segments = 200;
  std::optional<double> grid_spacing;  // unset: delta / 2
};

struct RunConfig {
  TargetSpec target = TargetSpec::gaussian1d(0.0, 1.0);
  KernelSpec kernel = KernelSpec::elo();
  FlowConfig flow;
  std::size_t k = 2;
  std::size_t n = 200;
  std::uint64_t seed = 0;
  std::optional<std::vector<double>> weights;
  InitMode init = InitMode::target;
  SwapInitOptions swap;  // swap_refined and radial
  double spread = 1.0;   // applied after initialization
  std::string out_dir = "run";
  std::size_t snapshot_every = 0;  // 0: first and final snapshot only
  DiagnosticsConfig diagnostics;

  /// Parsed key/value pairs by section, echoed into meta.json.
  std::map<std::string, std::map<std::string, std::string>> echo;
  std::string text;
};

/// Parses the INI-style run config. Throws ConfigError naming the section and key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Applies a "section.key=value" override on top of the parsed text.
RunConfig with_override(const RunConfig& cfg, const std::string& section, const std::string& key,
                        const std::string& value);

/// Initial state per the ensemble section.
DecompositionState initial_state(const RunConfig& cfg);

struct RunOutcome {
  RunRecord record;
  std::string out_dir;
  bool failed = false;
};

/// Runs the flow and writes trace.csv, particles_XXXX.csv, meta.json and report.json.
RunOutcome execute(const RunConfig& cfg);

/// Reloads the config and final state persisted in a run directory.
struct LoadedRun {
  RunConfig config;
  DecompositionState state;
  std::size_t final_t = 0;
};
LoadedRun load_run(const std::string& run_dir);

/// Baseline spec: "slices:<axis>", "quantile:<w1>,<w2>", "grand_league" or "run:<dir>".
/// Returns the JSON report text; also written to <run_dir>/compare_<kind>.json.
struct CompareResult {
  double run_objective = 0.0;
  double baseline_objective = 0.0;
  double improvement = 0.0;
  std::string json;
};
CompareResult compare(const std::string& run_dir, const std::string& baseline);

/// Reads a particles CSV (with meta.json and trace.csv next to it when present)
/// and writes support_mask.csv, winrate.csv and report.json to out_dir.
std::string diagnose(const std::string& snapshot_path, const std::string& out_dir);

/// Writes plot-ready CSVs into the run directory; returns warnings.
std::vector<std::string> emit_plots(const std::string& run_dir);

/// Final-state structural report as JSON text.
std::string state_report(const RunConfig& cfg, const DecompositionState& state);

struct EuclidOptions {
  std::string problem = "quad_origin";
  euclid::FlowConfig flow;
  double t_end = 1.0;
  std::string out_csv;
};
/// Integrates a built-in problem; returns a JSON summary.
std::string euclid_run(const EuclidOptions& opts);

/// Snapshot file name for iteration t.
std::string snapshot_name(std::size_t t);

/// %.17g formatting.
std::string fmt(double v);

}  // namespace msd::app
