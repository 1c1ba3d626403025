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

#include "msd/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include "json.hpp"

namespace msd::app {
namespace {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using json = nlohmann::ordered_json;

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Key/value view of one section with typed, error-naming accessors.
class Section {
public:
  Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

  bool present() const { return tree_ != nullptr; }
  bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

  std::string str(const std::string& key) const { return trim(tree_->get<std::string>(key)); }
  std::string str(const std::string& key, const std::string& def) const { return has(key) ? str(key) : def; }

  double num(const std::string& key) const {
    if (!has(key)) fail(key, "is required");
    return to_double(key, str(key));
  }
  double num(const std::string& key, double def) const { return has(key) ? num(key) : def; }

  double positive(const std::string& key, double def) const {
    const double v = num(key, def);
    if (!(v > 0.0)) fail(key, "must be positive");
    return v;
  }

  std::size_t count(const std::string& key, std::size_t def) const {
    if (!has(key)) return def;
    const std::string s = str(key);
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      fail(key, "must be a non-negative integer");
    }
    if (pos != s.size()) fail(key, "must be a non-negative integer");
    return static_cast<std::size_t>(v);
  }

  std::vector<double> list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
    if (out.empty()) fail(key, "must be a comma-separated list of numbers");
    return out;
  }

  void only(std::initializer_list<const char*> keys) const {
    if (!tree_) return;
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : *tree_)
      if (!allowed.count(k)) fail(k, "is not a recognised key");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError("[" + name_ + "] " + key + " " + what);
  }

private:
  double to_double(const std::string& key, const std::string& s) const {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      fail(key, "must be a number");
    }
    if (pos != s.size() || !std::isfinite(v)) fail(key, "must be a finite number");
    return v;
  }

  std::string name_;
  const pt::ptree* tree_;
};

Section section(const pt::ptree& root, const std::string& name) {
  const auto it = root.find(name);
  return Section(name, it == root.not_found() ? nullptr : &it->second);
}

TargetSpec parse_target(const pt::ptree& root, const std::string& name, bool allow_mixture) {
  const Section s = section(root, name);
  if (!s.present()) throw ConfigError("[" + name + "] section is required");
  const std::string family = lower(s.str("family", ""));
  const bool nested = name != "target";
  try {
    if (family == "gaussian") {
      nested ? s.only({"family", "weight", "mean", "sd"}) : s.only({"family", "mean", "sd"});
      return TargetSpec::gaussian1d(s.num("mean", 0.0), s.positive("sd", 1.0));
    }
    if (family == "mvnormal") {
      nested ? s.only({"family", "weight", "mean", "cov"}) : s.only({"family", "mean", "cov"});
      if (!s.has("mean")) s.fail("mean", "is required");
      auto mean = s.list("mean");
      std::vector<double> cov;
      if (s.has("cov")) {
        cov = s.list("cov");
      } else {
        cov.assign(mean.size() * mean.size(), 0.0);
        for (std::size_t i = 0; i < mean.size(); ++i) cov[i * mean.size() + i] = 1.0;
      }
      return TargetSpec::mvnormal(std::move(mean), std::move(cov));
    }
    if (family == "lognormal") {
      nested ? s.only({"family", "weight", "scale", "shape"}) : s.only({"family", "scale", "shape"});
      return TargetSpec::lognormal(s.num("scale", 0.0), s.positive("shape", 1.0));
    }
    if (family == "smoothed_uniform") {
      nested ? s.only({"family", "weight", "a", "b", "sharpness"}) : s.only({"family", "a", "b", "sharpness"});
      return TargetSpec::smoothed_uniform(s.num("a", 0.0), s.num("b", 1.0), s.num("sharpness", 0.0));
    }
    if (family == "mixture" && allow_mixture) {
      s.only({"family", "components"});
      const std::size_t m = s.count("components", 0);
      if (m == 0) s.fail("components", "must be at least 1");
      std::vector<std::pair<double, TargetSpec>> parts;
      for (std::size_t i = 1; i <= m; ++i) {
        const std::string sub = "target_" + std::to_string(i);
        const Section c = section(root, sub);
        if (!c.present()) throw ConfigError("[" + sub + "] section is required by [target] components");
        parts.emplace_back(c.positive("weight", 0.0), parse_target(root, sub, false));
      }
      return TargetSpec::mixture(std::move(parts));
    }
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind("[", 0) == 0) throw;
    throw ConfigError("[" + name + "] " + msg);
  }
  s.fail("family", "must be one of gaussian, mvnormal, lognormal, smoothed_uniform" +
                       std::string(allow_mixture ? ", mixture" : ""));
}

KernelSpec parse_loss(const pt::ptree& root, std::size_t dim) {
  const Section s = section(root, "loss");
  s.only({"kernel", "w", "w_diag"});
  const std::string kind = lower(s.str("kernel", "elo"));
  if (kind == "elo") {
    if (dim != 1) s.fail("kernel", "elo needs a one-dimensional target");
    return KernelSpec::elo();
  }
  if (kind == "zero") return KernelSpec::zero();
  if (kind == "variance") {
    try {
      if (s.has("w_diag")) return KernelSpec::variance_diagonal(s.list("w_diag"));
      if (s.has("w")) return KernelSpec::variance(s.list("w"), dim);
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      if (msg.rfind("[", 0) == 0) throw;
      throw ConfigError("[loss] " + msg);
    }
    std::vector<double> eye(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) eye[i * dim + i] = 1.0;
    return KernelSpec::variance(eye, dim);
  }
  s.fail("kernel", "must be one of elo, variance, zero");
}

KdeConfig parse_bandwidth(const Section& s, const std::string& key, const KdeConfig& base) {
  KdeConfig out = base;
  if (!s.has(key)) return out;
  const std::string v = lower(s.str(key));
  if (v == "silverman") {
    out.mode = KdeConfig::Bandwidth::silverman;
    return out;
  }
  const double h = s.num(key);
  if (!(h > 0.0)) s.fail(key, "must be silverman or a positive number");
  out.mode = KdeConfig::Bandwidth::fixed;
  out.h = h;
  return out;
}

bool parse_bool(const Section& s, const std::string& key, bool def) {
  if (!s.has(key)) return def;
  const std::string v = lower(s.str(key));
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  s.fail(key, "must be true or false");
}

RunConfig from_tree(const pt::ptree& root, std::string text) {
  static const std::set<std::string> known = {"target", "loss", "flow", "density", "ensemble", "output", "diagnostics"};
  for (const auto& [name, sub] : root) {
    if (!sub.data().empty() && sub.empty()) throw ConfigError("key '" + name + "' appears outside any section");
    if (!known.count(name) && name.rfind("target_", 0) != 0)
      throw ConfigError("[" + name + "] is not a recognised section");
  }

  RunConfig cfg;
  cfg.text = std::move(text);
  for (const auto& [name, sub] : root)
    for (const auto& [k, v] : sub) cfg.echo[name][k] = trim(v.data());

  cfg.target = parse_target(root, "target", true);
  cfg.kernel = parse_loss(root, cfg.target.dim());
  if (cfg.kernel.required_dim() != 0 && cfg.kernel.required_dim() != cfg.target.dim())
    throw ConfigError("[loss] w does not match the target dimension");

  const Section fl = section(root, "flow");
  fl.only({"mode", "alpha", "eta", "eta2", "iterations", "theta", "beta", "denom_floor", "p_floor",
           "positivity_guard"});
  const std::string mode = lower(fl.str("mode", "fixed"));
  if (mode == "fixed") {
    cfg.flow.mode = FlowMode::fixed_weights;
  } else if (mode == "dynamic") {
    cfg.flow.mode = FlowMode::dynamic_weights;
  } else {
    fl.fail("mode", "must be fixed or dynamic");
  }
  cfg.flow.alpha = fl.num("alpha", cfg.flow.alpha);
  cfg.flow.eta = fl.num("eta", cfg.flow.eta);
  cfg.flow.eta2 = fl.num("eta2", cfg.flow.eta2);
  cfg.flow.iterations = fl.count("iterations", cfg.flow.iterations);
  cfg.flow.theta = fl.num("theta", cfg.flow.theta);
  cfg.flow.beta = fl.num("beta", cfg.flow.beta);
  cfg.flow.denom_floor = fl.num("denom_floor", cfg.flow.denom_floor);
  cfg.flow.p_floor = fl.num("p_floor", cfg.flow.p_floor);
  if (fl.has("eta") && !(cfg.flow.eta > 0.0)) fl.fail("eta", "must be positive");
  if (fl.has("eta2") && !(cfg.flow.eta2 > 0.0)) fl.fail("eta2", "must be positive");
  if (fl.has("positivity_guard")) {
    const std::string g = lower(fl.str("positivity_guard"));
    if (g == "none") {
      cfg.flow.guard = PositivityGuard::none;
    } else if (g == "reflect") {
      cfg.flow.guard = PositivityGuard::reflect;
    } else if (g == "log_domain") {
      cfg.flow.guard = PositivityGuard::log_domain;
    } else {
      fl.fail("positivity_guard", "must be none, reflect or log_domain");
    }
  }

  const Section de = section(root, "density");
  de.only({"bandwidth", "unscaled_constant"});
  cfg.flow.kde = parse_bandwidth(de, "bandwidth", KdeConfig::silverman());
  cfg.flow.kde.unscaled_constant = parse_bool(de, "unscaled_constant", false);
  try {
    cfg.flow.validate();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    const std::string prefix = "flow.";
    throw ConfigError(msg.rfind(prefix, 0) == 0 ? "[flow] " + msg.substr(prefix.size()) : msg);
  }

  const Section en = section(root, "ensemble");
  en.only({"K", "N", "seed", "weights", "init", "sweeps", "restarts", "centre", "order", "spread"});
  cfg.k = en.count("K", cfg.k);
  cfg.n = en.count("N", cfg.n);
  cfg.seed = en.count("seed", 0);
  if (cfg.k == 0) en.fail("K", "must be at least 1");
  if (cfg.n < 2) en.fail("N", "must be at least 2");
  if (en.has("weights")) {
    cfg.weights = en.list("weights");
    if (cfg.weights->size() != cfg.k) en.fail("weights", "must have K entries");
    try {
      WeightVector(*cfg.weights, cfg.flow.p_floor);
    } catch (const ConfigError& e) {
      en.fail("weights", std::string("are invalid: ") + e.what());
    }
  }
  const std::string init = lower(en.str("init", "target"));
  if (init == "target") {
    cfg.init = InitMode::target;
  } else if (init == "swap_refined") {
    cfg.init = InitMode::swap_refined;
  } else if (init == "radial") {
    cfg.init = InitMode::radial;
    if (!en.has("centre")) en.fail("centre", "is required when init = radial");
    cfg.swap.centre = en.list("centre");
    if (cfg.swap.centre->size() != cfg.target.dim()) en.fail("centre", "must match the target dimension");
  } else {
    en.fail("init", "must be target, swap_refined or radial");
  }
  cfg.swap.sweeps = en.count("sweeps", cfg.swap.sweeps);
  cfg.swap.restarts = en.count("restarts", cfg.swap.restarts);
  const std::string order = lower(en.str("order", "forward"));
  if (order != "forward" && order != "reverse") en.fail("order", "must be forward or reverse");
  cfg.swap.reverse = order == "reverse";
  cfg.spread = en.positive("spread", 1.0);

  const Section out = section(root, "output");
  out.only({"dir", "snapshot_every"});
  cfg.out_dir = out.str("dir", cfg.out_dir);
  if (cfg.out_dir.empty()) out.fail("dir", "must not be empty");
  cfg.snapshot_every = out.count("snapshot_every", 0);

  const Section di = section(root, "diagnostics");
  di.only({"delta", "c", "bandwidth", "n_segments", "grid_spacing"});
  if (di.has("delta")) cfg.diagnostics.delta = di.positive("delta", 1.0);
  cfg.diagnostics.c = di.positive("c", cfg.diagnostics.c);
  cfg.diagnostics.kde = parse_bandwidth(di, "bandwidth", KdeConfig::silverman());
  cfg.diagnostics.n_segments = di.count("n_segments", cfg.diagnostics.n_segments);
  if (di.has("grid_spacing")) cfg.diagnostics.grid_spacing = di.positive("grid_spacing", 1.0);
  return cfg;
}

pt::ptree read_tree(const std::string& text) {
  pt::ptree root;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  return root;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + " is empty");
  t.header = split_csv(line);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != t.header.size()) throw IoError(path + ": row width differs from the header");
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        row.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw IoError(path + ": non-numeric cell '" + c + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string snapshot_csv(const DecompositionState& s) {
  std::string out = "t,k,i";
  for (std::size_t j = 1; j <= s.particles.dim(); ++j) out += ",x" + std::to_string(j);
  out += "\n";
  for (std::size_t k = 0; k < s.particles.groups(); ++k) {
    const auto& g = s.particles.group(k);
    for (std::size_t i = 0; i < g.size(); ++i) {
      out += std::to_string(s.iteration) + "," + std::to_string(k + 1) + "," + std::to_string(i);
      for (double v : g[i]) out += "," + fmt(v);
      out += "\n";
    }
  }
  return out;
}

// Snapshot rows grouped by k; returns the iteration stamped in the file.
std::pair<ParticleSet, std::size_t> parse_snapshot(const std::string& path) {
  const Table t = read_csv(path);
  if (t.header.size() < 4 || t.header[0] != "t" || t.header[1] != "k" || t.header[2] != "i")
    throw IoError(path + ": expected header t,k,i,x1..");
  if (t.rows.empty()) throw IoError(path + ": no particles");
  const std::size_t d = t.header.size() - 3;
  std::map<std::size_t, PointCloud> groups;
  for (const auto& r : t.rows) {
    auto& g = groups.try_emplace(static_cast<std::size_t>(r[1]), 0, d).first->second;
    g.push_back(PointView(r.data() + 3, d));
  }
  std::vector<PointCloud> list;
  for (auto& [k, g] : groups) list.push_back(std::move(g));
  try {
    return {ParticleSet(std::move(list)), static_cast<std::size_t>(t.rows.front()[0])};
  } catch (const ConfigError& e) {
    throw IoError(path + ": " + e.what());
  }
}

std::vector<fs::path> snapshots_in(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("particles_", 0) == 0 && e.path().extension() == ".csv") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Weights recorded in trace.csv at iteration t, if any.
std::optional<std::vector<double>> weights_at(const fs::path& dir, std::size_t t) {
  const fs::path trace = dir / "trace.csv";
  if (!fs::exists(trace)) return std::nullopt;
  const Table tab = read_csv(trace.string());
  std::size_t first = tab.header.size();
  for (std::size_t c = 0; c < tab.header.size(); ++c)
    if (tab.header[c].rfind("p_", 0) == 0) {
      first = c;
      break;
    }
  for (const auto& r : tab.rows)
    if (static_cast<std::size_t>(r[0]) == t) return std::vector<double>(r.begin() + first, r.end());
  return std::nullopt;
}

double weighted_loss(const DecompositionState& s, const KernelSpec& kern) {
  return objective(s, kern, FlowMode::fixed_weights, 0.0, 1.0);
}

double resolve_delta(const DiagnosticsConfig& dc, const DecompositionState& s) {
  return dc.delta ? *dc.delta : default_delta(s);
}

json structure_json(const DiagnosticsConfig& dc, const DecompositionState& s, const SupportMask* mask_out = nullptr) {
  (void)mask_out;
  json j;
  const double delta = resolve_delta(dc, s);
  j["delta"] = delta;
  j["c"] = dc.c;
  if (s.particles.groups() < 2) {
    j["disjoint"] = true;
    j["overlap_fraction"] = 0.0;
    j["convex_in_pairs"] = true;
    return j;
  }
  GridSpec grid;
  grid.spacing = dc.grid_spacing;
  const SupportMask mask = interior_supports(s.particles, dc.kde, delta, dc.c, grid);
  const DisjointnessReport dr = disjointness(mask);
  const ConvexReport cr = convex_in_pairs(mask, dc.n_segments, s.rng_seed);
  j["lattice_points"] = mask.lattice.size();
  j["lattice_spacing"] = mask.lattice.spacing;
  j["support_bandwidth"] = mask.bandwidth;
  j["disjoint"] = dr.disjoint;
  j["overlap_fraction"] = dr.overlap_fraction;
  j["covered_points"] = dr.covered;
  j["shared_points"] = dr.shared;
  j["convex_in_pairs"] = cr.holds;
  j["convex_violations"] = cr.violations.size();
  if (!cr.violations.empty()) {
    const auto& v = cr.violations.front();
    j["first_violation"] = {{"group", v.group + 1}, {"intruder", v.intruder + 1}, {"point", v.point}};
  }
  return j;
}

std::string trace_csv(const RunRecord& rec, std::size_t k) {
  std::string out = "t,kl,objective,lambda,phi_norm,bandwidth";
  for (std::size_t g = 1; g <= k; ++g) out += ",p_" + std::to_string(g);
  out += "\n";
  for (std::size_t t = 0; t < rec.length(); ++t) {
    out += std::to_string(t) + "," + fmt(rec.kl[t]) + "," + fmt(rec.objective[t]) + "," + fmt(rec.lambda[t]) + "," +
           fmt(rec.phi_norm[t]) + "," + fmt(rec.bandwidth[t]);
    for (double p : rec.weights[t]) out += "," + fmt(p);
    out += "\n";
  }
  return out;
}

std::string init_name(InitMode m) {
  switch (m) {
    case InitMode::target:
      return "target";
    case InitMode::swap_refined:
      return "swap_refined";
    case InitMode::radial:
      return "radial";
  }
  return "target";
}

std::string guard_name(PositivityGuard g) {
  switch (g) {
    case PositivityGuard::none:
      return "none";
    case PositivityGuard::reflect:
      return "reflect";
    case PositivityGuard::log_domain:
      return "log_domain";
  }
  return "none";
}

// Pooled 1-D values of a state, for win-rate curves and histograms.
std::vector<double> pooled_1d(const ParticleSet& ps) {
  std::vector<double> v;
  for (std::size_t k = 0; k < ps.groups(); ++k)
    for (std::size_t i = 0; i < ps.group(k).size(); ++i) v.push_back(ps.group(k)[i][0]);
  return v;
}

std::string winrate_csv(const ParticleSet& ps, std::size_t levels = 200) {
  const auto all = pooled_1d(ps);
  const auto [mn, mx] = std::minmax_element(all.begin(), all.end());
  const double lo = std::max(*mn, 1e-12), hi = std::max(*mx, lo * (1.0 + 1e-9));
  std::vector<double> grid(levels);
  for (std::size_t i = 0; i < levels; ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(levels - 1);
  std::vector<std::vector<double>> curves;
  for (std::size_t k = 0; k < ps.groups(); ++k) {
    std::vector<double> opp;
    for (std::size_t i = 0; i < ps.group(k).size(); ++i) opp.push_back(ps.group(k)[i][0]);
    curves.push_back(win_rate_curve(opp, grid));
  }
  const auto grand = win_rate_curve(all, grid);
  std::string out = "x";
  for (std::size_t k = 1; k <= ps.groups(); ++k) out += ",league_" + std::to_string(k);
  out += ",grand\n";
  for (std::size_t i = 0; i < levels; ++i) {
    out += fmt(grid[i]);
    for (const auto& c : curves) out += "," + fmt(c[i]);
    out += "," + fmt(grand[i]) + "\n";
  }
  return out;
}

bool positive_1d(const ParticleSet& ps) {
  if (ps.dim() != 1) return false;
  const auto all = pooled_1d(ps);
  return std::all_of(all.begin(), all.end(), [](double v) { return v > 0.0; });
}

}  // namespace

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string snapshot_name(std::size_t t) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "particles_%04zu.csv", t);
  return buf;
}

RunConfig parse_config(const std::string& text) { return from_tree(read_tree(text), text); }

RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

RunConfig with_override(const RunConfig& cfg, const std::string& sec, const std::string& key,
                        const std::string& value) {
  pt::ptree root = read_tree(cfg.text);
  root.put(pt::ptree::path_type(sec + "\x1f" + key, '\x1f'), value);
  std::ostringstream out;
  pt::ini_parser::write_ini(out, root);
  return from_tree(root, out.str());
}

DecompositionState initial_state(const RunConfig& cfg) {
  DecompositionState s =
      cfg.init == InitMode::target
          ? init_from_target(cfg.target, cfg.k, cfg.n, cfg.seed, cfg.weights, cfg.flow.p_floor)
          : init_swap_refined(cfg.target, cfg.kernel, cfg.k, cfg.n, cfg.seed, cfg.weights, cfg.flow.p_floor, cfg.swap);
  if (cfg.spread != 1.0) rescale_about_mean(s, cfg.spread);
  return s;
}

std::string state_report(const RunConfig& cfg, const DecompositionState& state) {
  json j;
  j["iteration"] = state.iteration;
  j["weights"] = state.weights.values();
  std::vector<double> losses;
  for (std::size_t k = 0; k < state.particles.groups(); ++k)
    losses.push_back(loss_estimate(cfg.kernel, state.particles.group(k)));
  j["group_loss"] = losses;
  j["weighted_loss"] = weighted_loss(state, cfg.kernel);
  j["objective"] = objective(state, cfg.kernel, cfg.flow.mode, cfg.flow.theta, cfg.flow.beta);
  j["structure"] = structure_json(cfg.diagnostics, state);
  return j.dump(2) + "\n";
}

RunOutcome execute(const RunConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& old : snapshots_in(dir)) fs::remove(old);

  const DecompositionState init = initial_state(cfg);
  const std::size_t every = cfg.snapshot_every;
  StateObserver observer = [&](const DecompositionState& s) {
    if (s.iteration == 0 || (every > 0 && s.iteration % every == 0))
      write_file(dir / snapshot_name(s.iteration), snapshot_csv(s));
  };

  RunOutcome out;
  out.out_dir = dir.string();
  out.record = run_flow(init, cfg.target, cfg.kernel, cfg.flow, observer);
  const RunRecord& rec = out.record;
  out.failed = rec.failed_at.has_value();
  const DecompositionState& fin = rec.final_state;
  write_file(dir / snapshot_name(fin.iteration), snapshot_csv(fin));
  write_file(dir / "trace.csv", trace_csv(rec, cfg.k));

  json meta;
  meta["version"] = kVersion;
  meta["rng"] = Rng::kAlgorithm;
  meta["seed"] = cfg.seed;
  meta["target"] = cfg.target.family_name();
  meta["kernel"] = cfg.kernel.name();
  meta["mode"] = cfg.flow.mode == FlowMode::dynamic_weights ? "dynamic" : "fixed";
  meta["init"] = init_name(cfg.init);
  meta["eta"] = rec.eta;
  meta["eta2"] = rec.eta2;
  meta["positivity_guard"] = guard_name(cfg.flow.resolved_guard(cfg.kernel));
  meta["iterations"] = cfg.flow.iterations;
  meta["final_t"] = fin.iteration;
  meta["final_weights"] = fin.weights.values();
  meta["failed_at"] = rec.failed_at ? json(*rec.failed_at) : json(nullptr);
  if (rec.failed_at) meta["failure"] = rec.failure;
  meta["config"] = cfg.echo;
  meta["config_text"] = cfg.text;
  write_file(dir / "meta.json", meta.dump(2) + "\n");

  if (!out.failed) write_file(dir / "report.json", state_report(cfg, fin));
  return out;
}

LoadedRun load_run(const std::string& run_dir) {
  const fs::path dir(run_dir);
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) throw IoError(run_dir + ": meta.json is missing");
  json meta;
  try {
    meta = json::parse(read_file(meta_path.string()));
  } catch (const json::exception& e) {
    throw IoError(run_dir + ": meta.json is unreadable: " + e.what());
  }
  LoadedRun out;
  out.config = parse_config(meta.at("config_text").get<std::string>());
  out.final_t = meta.at("final_t").get<std::size_t>();
  const fs::path snap = dir / snapshot_name(out.final_t);
  if (!fs::exists(snap)) throw IoError(run_dir + ": " + snap.filename().string() + " is missing");
  auto [ps, t] = parse_snapshot(snap.string());
  const auto w = meta.at("final_weights").get<std::vector<double>>();
  out.state = DecompositionState{std::move(ps), WeightVector(w, out.config.flow.p_floor), t, out.config.seed};
  return out;
}

CompareResult compare(const std::string& run_dir, const std::string& baseline) {
  const LoadedRun run = load_run(run_dir);
  const RunConfig& cfg = run.config;
  const std::size_t colon = baseline.find(':');
  const std::string kind = lower(trim(baseline.substr(0, colon)));
  const std::string arg = colon == std::string::npos ? "" : trim(baseline.substr(colon + 1));
  const auto pool = [&] { return sample(cfg.target, cfg.k * cfg.n, cfg.seed); };

  json j;
  j["run_dir"] = run_dir;
  j["baseline"] = baseline;
  double base = 0.0;
  if (kind == "slices") {
    const PointCloud samples = pool();
    std::vector<std::size_t> axes;
    if (arg.empty() || arg == "best") {
      for (std::size_t a = 0; a < samples.dim(); ++a) axes.push_back(a);
    } else {
      std::size_t axis = 0;
      try {
        axis = std::stoul(arg);
      } catch (const std::exception&) {
        throw ConfigError("baseline slices: axis must be a 1-based integer or 'best'");
      }
      if (axis < 1 || axis > samples.dim()) throw ConfigError("baseline slices: axis out of range");
      axes.push_back(axis - 1);
    }
    base = std::numeric_limits<double>::infinity();
    json per_axis = json::array();
    for (std::size_t a : axes) {
      const double v = weighted_loss(baseline_parallel_slices(samples, cfg.k, a), cfg.kernel);
      per_axis.push_back({{"axis", a + 1}, {"objective", v}});
      if (v < base) {
        base = v;
        j["axis"] = a + 1;
      }
    }
    j["per_axis"] = per_axis;
  } else if (kind == "quantile") {
    if (cfg.target.dim() != 1) throw ConfigError("baseline quantile needs a one-dimensional target");
    std::vector<double> w;
    std::stringstream ss(arg);
    std::string item;
    try {
      while (std::getline(ss, item, ',')) w.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("baseline quantile: expected quantile:<w1>,<w2>");
    }
    if (w.size() != 2 || !(w[0] > 0.0 && w[1] > 0.0) || std::abs(w[0] + w[1] - 1.0) > 1e-9)
      throw ConfigError("baseline quantile: weights must be two positive numbers summing to 1");
    const PointCloud samples = pool();
    base = weighted_loss(baseline_quantile_split(samples, w[0]), cfg.kernel);
    j["boundary"] = quantile_boundary(samples, w[0]);
  } else if (kind == "grand_league") {
    base = weighted_loss(baseline_grand_league(pool()), cfg.kernel);
  } else if (kind == "run") {
    if (arg.empty()) throw ConfigError("baseline run: expected run:<dir>");
    const LoadedRun other = load_run(arg);
    base = weighted_loss(other.state, other.config.kernel);
  } else {
    throw ConfigError("baseline must be slices:<axis>, quantile:<w1>,<w2>, grand_league or run:<dir>");
  }

  CompareResult res;
  res.run_objective = weighted_loss(run.state, cfg.kernel);
  res.baseline_objective = base;
  res.improvement = base == 0.0 ? 0.0 : (base - res.run_objective) / base;
  j["run_objective"] = res.run_objective;
  j["baseline_objective"] = res.baseline_objective;
  j["improvement"] = res.improvement;
  res.json = j.dump(2) + "\n";
  write_file(fs::path(run_dir) / ("compare_" + kind + ".json"), res.json);
  return res;
}

std::string diagnose(const std::string& snapshot_path, const std::string& out_dir) {
  if (!fs::exists(snapshot_path)) throw IoError(snapshot_path + " does not exist");
  const fs::path run_dir = fs::path(snapshot_path).parent_path();
  auto [ps, t] = parse_snapshot(snapshot_path);

  RunConfig cfg;
  const fs::path meta = run_dir / "meta.json";
  if (fs::exists(meta)) {
    try {
      cfg = parse_config(json::parse(read_file(meta.string())).at("config_text").get<std::string>());
    } catch (const json::exception& e) {
      throw IoError(meta.string() + " is unreadable: " + e.what());
    }
  }
  const auto w = weights_at(run_dir, t);
  WeightVector weights = w && w->size() == ps.groups() ? WeightVector(*w, cfg.flow.p_floor)
                                                       : WeightVector::equal(ps.groups(), cfg.flow.p_floor);
  const DecompositionState state{std::move(ps), std::move(weights), t, cfg.seed};

  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  json j;
  j["snapshot"] = snapshot_path;
  j["iteration"] = t;
  j["weights"] = state.weights.values();
  j["structure"] = structure_json(cfg.diagnostics, state);

  const double delta = resolve_delta(cfg.diagnostics, state);
  GridSpec grid;
  grid.spacing = cfg.diagnostics.grid_spacing;
  const SupportMask mask = interior_supports(state.particles, cfg.diagnostics.kde, delta, cfg.diagnostics.c, grid);
  std::string csv;
  for (std::size_t q = 1; q <= state.particles.dim(); ++q) csv += (q > 1 ? ",x" : "x") + std::to_string(q);
  for (std::size_t k = 1; k <= state.particles.groups(); ++k) csv += ",member_" + std::to_string(k);
  csv += "\n";
  for (std::size_t p = 0; p < mask.lattice.size(); ++p) {
    bool any = false;
    for (const auto& m : mask.member) any = any || m[p];
    if (!any) continue;
    const Point x = mask.lattice.point(p);
    for (std::size_t q = 0; q < x.size(); ++q) csv += (q ? "," : "") + fmt(x[q]);
    for (const auto& m : mask.member) csv += m[p] ? ",1" : ",0";
    csv += "\n";
  }
  write_file(dir / "support_mask.csv", csv);
  if (positive_1d(state.particles)) write_file(dir / "winrate.csv", winrate_csv(state.particles));

  const std::string text = j.dump(2) + "\n";
  write_file(dir / "report.json", text);
  return text;
}

std::vector<std::string> emit_plots(const std::string& run_dir) {
  const fs::path dir(run_dir);
  if (!fs::exists(dir / "trace.csv")) throw IoError(run_dir + ": trace.csv is missing");
  std::vector<std::string> warnings;

  const Table trace = read_csv((dir / "trace.csv").string());
  std::string tr = "t,kl,objective,lambda,phi_norm\n";
  for (const auto& r : trace.rows)
    tr += fmt(r[0]) + "," + fmt(r[1]) + "," + fmt(r[2]) + "," + fmt(r[3]) + "," + fmt(r[4]) + "\n";
  write_file(dir / "traces.csv", tr);
  if (trace.header.size() > 6) {
    std::string wt = "t";
    for (std::size_t c = 6; c < trace.header.size(); ++c) wt += "," + trace.header[c];
    wt += "\n";
    for (const auto& r : trace.rows) {
      wt += fmt(r[0]);
      for (std::size_t c = 6; c < r.size(); ++c) wt += "," + fmt(r[c]);
      wt += "\n";
    }
    write_file(dir / "weights.csv", wt);
  }

  const auto snaps = snapshots_in(dir);
  if (snaps.empty()) {
    warnings.push_back("no particle snapshots in " + run_dir + "; emitted traces only");
    return warnings;
  }

  auto scatter = [&](const fs::path& snap, const std::string& name) {
    const auto [ps, t] = parse_snapshot(snap.string());
    const std::size_t d = std::min<std::size_t>(ps.dim(), 2);
    std::string out = d == 2 ? "k,x1,x2\n" : "k,x1\n";
    for (std::size_t k = 0; k < ps.groups(); ++k)
      for (std::size_t i = 0; i < ps.group(k).size(); ++i) {
        out += std::to_string(k + 1);
        for (std::size_t q = 0; q < d; ++q) out += "," + fmt(ps.group(k)[i][q]);
        out += "\n";
      }
    write_file(dir / name, out);
    return ps;
  };
  scatter(snaps.front(), "scatter_initial.csv");
  const ParticleSet fin = scatter(snaps.back(), "scatter_final.csv");

  // Histogram of the first coordinate, 40 shared bins.
  const auto all = pooled_1d(fin);
  const auto [mn, mx] = std::minmax_element(all.begin(), all.end());
  const std::size_t bins = 40;
  const double lo = *mn, width = std::max(*mx - *mn, 1e-12) / static_cast<double>(bins);
  std::vector<std::vector<std::size_t>> counts(fin.groups(), std::vector<std::size_t>(bins, 0));
  for (std::size_t k = 0; k < fin.groups(); ++k)
    for (std::size_t i = 0; i < fin.group(k).size(); ++i) {
      const auto b = static_cast<std::size_t>((fin.group(k)[i][0] - lo) / width);
      ++counts[k][std::min(b, bins - 1)];
    }
  std::string hist = "bin_lo,bin_hi";
  for (std::size_t k = 1; k <= fin.groups(); ++k) hist += ",count_" + std::to_string(k);
  hist += "\n";
  for (std::size_t b = 0; b < bins; ++b) {
    hist += fmt(lo + width * static_cast<double>(b)) + "," + fmt(lo + width * static_cast<double>(b + 1));
    for (const auto& c : counts) hist += "," + std::to_string(c[b]);
    hist += "\n";
  }
  write_file(dir / "hist.csv", hist);

  if (positive_1d(fin)) write_file(dir / "winrate.csv", winrate_csv(fin));
  return warnings;
}

std::string euclid_run(const EuclidOptions& opts) {
  opts.flow.validate();
  if (!(opts.t_end > 0.0)) throw ConfigError("euclid: t_end must be positive");
  const euclid::Problem prob = euclid::make_problem(opts.problem);
  const auto traj = euclid::integrate(prob, prob.x0, opts.flow, opts.t_end);
  if (!opts.out_csv.empty()) euclid::write_trajectory_csv(opts.out_csv, traj);
  const auto& first = traj.front();
  const auto& last = traj.back();
  json j;
  j["problem"] = prob.name;
  j["scheme"] = opts.flow.scheme == euclid::Scheme::rk4 ? "rk4" : "euler";
  j["variant"] = opts.flow.variant == euclid::LambdaVariant::equality ? "equality" : "positive_part";
  j["alpha"] = opts.flow.alpha;
  j["tau"] = opts.flow.tau;
  j["t_end"] = last.t;
  j["steps"] = traj.size() - 1;
  j["g0"] = first.g;
  j["g_final"] = last.g;
  j["g_expected"] = first.g * std::exp(-opts.flow.alpha * last.t);
  j["f0"] = first.f;
  j["f_final"] = last.f;
  j["x_final"] = last.x;
  j["kkt_residual"] = last.kkt_residual;
  j["kkt_running_min"] = last.kkt_running_min;
  if (prob.f_min && prob.grad_f_bound && prob.pl_constant) {
    const double c = euclid::residual_bound_constant(first.f, *prob.f_min, first.g, *prob.grad_f_bound,
                                                     *prob.pl_constant, opts.flow.alpha);
    j["bound_constant"] = c;
    j["bound"] = c / std::sqrt(last.t);
  }
  return j.dump(2) + "\n";
}

}  // namespace msd::app
