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

#include "msd/msd_c.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "msd/runner.hpp"

struct msd_config {
  msd::app::RunConfig cfg;
};

struct msd_run {
  msd::app::RunOutcome outcome;
};

namespace {

thread_local std::string g_last_error;

msd_status fail(msd_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <class Fn>
msd_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const msd::ConfigError& e) {
    return fail(MSD_ERR_CONFIG, e.what());
  } catch (const msd::DomainError& e) {
    return fail(MSD_ERR_NUMERIC, e.what());
  } catch (const msd::NumericalError& e) {
    return fail(MSD_ERR_NUMERIC, e.what());
  } catch (const msd::IoError& e) {
    return fail(MSD_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MSD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MSD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MSD_ERR_INTERNAL, "unknown error");
  }
}

char* dup(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

msd_status copy_out(const std::vector<double>& v, double* buf, size_t cap, size_t* needed) {
  if (needed) *needed = v.size();
  if (!buf && cap == 0) return MSD_OK;
  if (!buf || cap < v.size()) return fail(MSD_ERR_ARG, "buffer too small");
  std::copy(v.begin(), v.end(), buf);
  return MSD_OK;
}

}  // namespace

extern "C" {

const char* msd_version(void) { return msd::app::kVersion; }

const char* msd_last_error(void) { return g_last_error.c_str(); }

void msd_string_free(char* s) { std::free(s); }

msd_status msd_config_load(const char* path, msd_config_t** out) {
  if (!path || !out) return fail(MSD_ERR_ARG, "path and out must not be null");
  return guarded([&] {
    *out = new msd_config{msd::app::load_config(path)};
    return MSD_OK;
  });
}

msd_status msd_config_parse(const char* text, msd_config_t** out) {
  if (!text || !out) return fail(MSD_ERR_ARG, "text and out must not be null");
  return guarded([&] {
    *out = new msd_config{msd::app::parse_config(text)};
    return MSD_OK;
  });
}

msd_status msd_config_set(msd_config_t* cfg, const char* section, const char* key, const char* value) {
  if (!cfg || !section || !key || !value) return fail(MSD_ERR_ARG, "arguments must not be null");
  return guarded([&] {
    cfg->cfg = msd::app::with_override(cfg->cfg, section, key, value);
    return MSD_OK;
  });
}

void msd_config_free(msd_config_t* cfg) { delete cfg; }

msd_status msd_run_execute(const msd_config_t* cfg, msd_run_t** out) {
  if (!cfg || !out) return fail(MSD_ERR_ARG, "cfg and out must not be null");
  *out = nullptr;
  return guarded([&] {
    auto* run = new msd_run{msd::app::execute(cfg->cfg)};
    *out = run;
    if (run->outcome.failed)
      return fail(MSD_ERR_NUMERIC, "numerical failure at t=" + std::to_string(*run->outcome.record.failed_at) + ": " +
                                       run->outcome.record.failure);
    return MSD_OK;
  });
}

size_t msd_run_length(const msd_run_t* run) { return run ? run->outcome.record.length() : 0; }

size_t msd_run_groups(const msd_run_t* run) { return run ? run->outcome.record.final_state.weights.size() : 0; }

int64_t msd_run_failed_at(const msd_run_t* run) {
  if (!run || !run->outcome.record.failed_at) return -1;
  return static_cast<int64_t>(*run->outcome.record.failed_at);
}

const char* msd_run_dir(const msd_run_t* run) { return run ? run->outcome.out_dir.c_str() : ""; }

msd_status msd_run_series(const msd_run_t* run, msd_series which, double* buf, size_t cap, size_t* needed) {
  if (!run) return fail(MSD_ERR_ARG, "run must not be null");
  const auto& r = run->outcome.record;
  switch (which) {
    case MSD_SERIES_KL:
      return copy_out(r.kl, buf, cap, needed);
    case MSD_SERIES_OBJECTIVE:
      return copy_out(r.objective, buf, cap, needed);
    case MSD_SERIES_LAMBDA:
      return copy_out(r.lambda, buf, cap, needed);
    case MSD_SERIES_PHI_NORM:
      return copy_out(r.phi_norm, buf, cap, needed);
    case MSD_SERIES_BANDWIDTH:
      return copy_out(r.bandwidth, buf, cap, needed);
  }
  return fail(MSD_ERR_ARG, "unknown series");
}

msd_status msd_run_weights(const msd_run_t* run, size_t t, double* buf, size_t cap, size_t* needed) {
  if (!run) return fail(MSD_ERR_ARG, "run must not be null");
  const auto& w = run->outcome.record.weights;
  if (t >= w.size()) return fail(MSD_ERR_ARG, "t is past the end of the run");
  return copy_out(w[t], buf, cap, needed);
}

void msd_run_free(msd_run_t* run) { delete run; }

msd_status msd_compare(const char* run_dir, const char* baseline, double* improvement, char** json_out) {
  if (!run_dir || !baseline) return fail(MSD_ERR_ARG, "run_dir and baseline must not be null");
  return guarded([&] {
    const auto res = msd::app::compare(run_dir, baseline);
    if (improvement) *improvement = res.improvement;
    if (json_out) *json_out = dup(res.json);
    return MSD_OK;
  });
}

msd_status msd_diagnose(const char* snapshot_path, const char* out_dir, char** json_out) {
  if (!snapshot_path || !out_dir) return fail(MSD_ERR_ARG, "snapshot_path and out_dir must not be null");
  return guarded([&] {
    const std::string text = msd::app::diagnose(snapshot_path, out_dir);
    if (json_out) *json_out = dup(text);
    return MSD_OK;
  });
}

msd_status msd_emit_plots(const char* run_dir, char** warnings_out) {
  if (!run_dir) return fail(MSD_ERR_ARG, "run_dir must not be null");
  return guarded([&] {
    std::string joined;
    for (const auto& w : msd::app::emit_plots(run_dir)) joined += w + "\n";
    if (warnings_out) *warnings_out = dup(joined);
    return MSD_OK;
  });
}

msd_status msd_euclid_run(const char* problem, double alpha, double tau, msd_scheme scheme,
                          msd_lambda_variant variant, double t_end, const char* out_csv, char** json_out) {
  if (!problem) return fail(MSD_ERR_ARG, "problem must not be null");
  return guarded([&] {
    msd::app::EuclidOptions opts;
    opts.problem = problem;
    opts.flow.alpha = alpha;
    opts.flow.tau = tau;
    opts.flow.scheme = scheme == MSD_SCHEME_EULER ? msd::euclid::Scheme::euler : msd::euclid::Scheme::rk4;
    opts.flow.variant = variant == MSD_LAMBDA_POSITIVE_PART ? msd::euclid::LambdaVariant::positive_part
                                                            : msd::euclid::LambdaVariant::equality;
    opts.t_end = t_end;
    if (out_csv) opts.out_csv = out_csv;
    const std::string text = msd::app::euclid_run(opts);
    if (json_out) *json_out = dup(text);
    return MSD_OK;
  });
}

}  // extern "C"
