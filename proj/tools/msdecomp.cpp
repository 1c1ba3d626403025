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

// msdecomp: command-line front end over the C API.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "msd/msd_c.h"

namespace {

int exit_code(msd_status s) {
  switch (s) {
    case MSD_OK:
      return 0;
    case MSD_ERR_NUMERIC:
      return 3;
    case MSD_ERR_INTERNAL:
      return 1;
    default:
      return 2;
  }
}

int report(msd_status s, const char* what) {
  if (s != MSD_OK) std::fprintf(stderr, "msdecomp %s: %s\n", what, msd_last_error());
  return exit_code(s);
}

void print_and_free(char* text) {
  if (!text) return;
  std::fputs(text, stdout);
  msd_string_free(text);
}

int cmd_run(const std::string& path, const std::vector<std::string>& sets, const std::string& out_dir) {
  msd_config_t* cfg = nullptr;
  msd_status s = msd_config_load(path.c_str(), &cfg);
  if (s != MSD_OK) return report(s, "run");
  for (const auto& kv : sets) {
    const auto dot = kv.find('.');
    const auto eq = kv.find('=');
    if (dot == std::string::npos || eq == std::string::npos || dot > eq) {
      std::fprintf(stderr, "msdecomp run: --set expects section.key=value, got '%s'\n", kv.c_str());
      msd_config_free(cfg);
      return 2;
    }
    s = msd_config_set(cfg, kv.substr(0, dot).c_str(), kv.substr(dot + 1, eq - dot - 1).c_str(),
                       kv.substr(eq + 1).c_str());
    if (s != MSD_OK) {
      msd_config_free(cfg);
      return report(s, "run");
    }
  }
  if (!out_dir.empty() && (s = msd_config_set(cfg, "output", "dir", out_dir.c_str())) != MSD_OK) {
    msd_config_free(cfg);
    return report(s, "run");
  }

  msd_run_t* run = nullptr;
  s = msd_run_execute(cfg, &run);
  msd_config_free(cfg);
  if (run) {
    const size_t n = msd_run_length(run);
    std::vector<double> kl(n), obj(n);
    msd_run_series(run, MSD_SERIES_KL, kl.data(), n, nullptr);
    msd_run_series(run, MSD_SERIES_OBJECTIVE, obj.data(), n, nullptr);
    if (n > 0)
      std::printf("%s: %zu iterations, kl %.6g -> %.6g, objective %.6g -> %.6g\n", msd_run_dir(run), n - 1, kl[0],
                  kl[n - 1], obj[0], obj[n - 1]);
    msd_run_free(run);
  }
  return report(s, "run");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-species decomposition by constrained Wasserstein gradient flows"};
  app.require_subcommand(1);
  app.set_version_flag("--version", msd_version());

  std::string cfg_path, out_dir;
  std::vector<std::string> sets;
  auto* run = app.add_subcommand("run", "Run a flow from a config file");
  run->add_option("config", cfg_path, "Config file")->required();
  run->add_option("--set", sets, "Override a config entry, section.key=value");
  run->add_option("--out", out_dir, "Output directory (overrides [output] dir)");

  std::string run_dir, baseline;
  auto* cmp = app.add_subcommand("compare", "Compare a run against a baseline decomposition");
  cmp->add_option("run_dir", run_dir, "Run directory")->required();
  cmp->add_option("--baseline", baseline, "slices:<axis>|slices:best|quantile:<w1>,<w2>|grand_league|run:<dir>")
      ->required();

  std::string snapshot, diag_out;
  auto* diag = app.add_subcommand("diagnose", "Structural diagnostics of a particle snapshot");
  diag->add_option("snapshot", snapshot, "particles_XXXX.csv")->required();
  diag->add_option("--out", diag_out, "Output directory (default: <snapshot dir>/diagnose)");

  std::string plots_dir;
  auto* plots = app.add_subcommand("emit-plots", "Write plot-ready CSVs for a run");
  plots->add_option("run_dir", plots_dir, "Run directory")->required();

  auto* euclid = app.add_subcommand("euclid", "Euclidean constrained flow");
  euclid->require_subcommand(1);
  std::string problem = "quad_origin", scheme = "rk4", variant = "equality", csv;
  double alpha = 1.0, tau = 1e-3, t_end = 1.0;
  auto* erun = euclid->add_subcommand("run", "Integrate a built-in problem");
  erun->add_option("--problem", problem, "quad_origin|line_hyperbolic|quad_sphere")->capture_default_str();
  erun->add_option("--alpha", alpha)->capture_default_str();
  erun->add_option("--tau", tau)->capture_default_str();
  erun->add_option("--t-end", t_end)->capture_default_str();
  erun->add_option("--scheme", scheme)->check(CLI::IsMember({"euler", "rk4"}))->capture_default_str();
  erun->add_option("--variant", variant)->check(CLI::IsMember({"equality", "positive_part"}))->capture_default_str();
  erun->add_option("--csv", csv, "Trajectory CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*run) return cmd_run(cfg_path, sets, out_dir);
  if (*cmp) {
    char* json = nullptr;
    const msd_status s = msd_compare(run_dir.c_str(), baseline.c_str(), nullptr, &json);
    print_and_free(json);
    return report(s, "compare");
  }
  if (*diag) {
    if (diag_out.empty()) {
      const auto slash = snapshot.find_last_of('/');
      diag_out = (slash == std::string::npos ? std::string(".") : snapshot.substr(0, slash)) + "/diagnose";
    }
    char* json = nullptr;
    const msd_status s = msd_diagnose(snapshot.c_str(), diag_out.c_str(), &json);
    print_and_free(json);
    return report(s, "diagnose");
  }
  if (*plots) {
    char* warnings = nullptr;
    const msd_status s = msd_emit_plots(plots_dir.c_str(), &warnings);
    if (warnings) {
      if (*warnings) std::fprintf(stderr, "warning: %s", warnings);
      msd_string_free(warnings);
    }
    return report(s, "emit-plots");
  }
  if (*erun) {
    char* json = nullptr;
    const msd_status s = msd_euclid_run(problem.c_str(), alpha, tau, scheme == "euler" ? MSD_SCHEME_EULER : MSD_SCHEME_RK4,
                                        variant == "positive_part" ? MSD_LAMBDA_POSITIVE_PART : MSD_LAMBDA_EQUALITY,
                                        t_end, csv.empty() ? nullptr : csv.c_str(), &json);
    print_and_free(json);
    return report(s, "euclid run");
  }
  return 2;
}
