#pragma once

// Experiment configuration: INI text with sections, parsed with Boost.PropertyTree.
//
// Grammar: "[section]" lines and "key = value" lines, ';' or '#' comments.
// Every key is optional; unknown sections or keys are errors.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cylmode/errors.hpp"
#include "cylmode/grid.hpp"
#include "cylmode/inequalities.hpp"
#include "cylmode/profiles.hpp"
#include "cylmode/state.hpp"
#include "cylmode/stepper.hpp"

namespace cylmode {

enum class RunMode { ns, ans, stokes_only, linear_flow };

inline std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::ns: return "ns";
    case RunMode::ans: return "ans";
    case RunMode::stokes_only: return "stokes_only";
    case RunMode::linear_flow: return "linear_flow";
  }
  return "?";
}

inline RunMode run_mode_from_string(const std::string& s) {
  for (auto m : {RunMode::ns, RunMode::ans, RunMode::stokes_only, RunMode::linear_flow})
    if (to_string(m) == s) return m;
  throw InvalidArgument("unknown run mode '" + s + "'");
}

struct GridConfig {
  int n_r = 24;
  int n_z = 16;
  double L_z = 2.0 * kPi;
  RadialScheme scheme = RadialScheme::chebyshev_gauss_lobatto_mapped;
};

struct ProfileConfig {
  std::string family = "smooth";  // built-in name, or "random" (seeded)
  double amplitude = 0.1;
  unsigned long long seed = 1;
};

struct RunConfig {
  RunMode mode = RunMode::ns;
  std::string output_dir = "out";
  int snapshot_every = 1;
  bool write_budget = true;
  bool write_history = true;
  bool mixed_norms = false;  // Lemma 3.3 table
  int pair_N = 0;            // > 0: rerun with this N and emit the N-scaling summary
};

struct StokesTestConfig {
  double T = 0.05;
  double dt = 0.01;
  int states = 10;
  std::vector<int> modes = {0, 1, 2, 5};
  std::vector<int> leakage_modes = {0, 1, 3};
  unsigned long long seed = 1;
};

struct OracleCompareConfig {
  double amplitude = 1e-3;
  int steps = 200;
  double dt = 2.5e-3;
  int n_theta = 0;  // 0: 4 K N
  double theta_scheme = 0.5;
  unsigned long long seed = 1;
};

struct ExperimentConfig {
  Params params;
  GridConfig grid;
  StepConfig step;
  ProfileConfig profile;
  RunConfig run;
  ScanSpec scan;
  StokesTestConfig stokes;
  OracleCompareConfig oracle;

  // Cross-field checks; every problem is reported, nothing is computed first.
  // with_oracle: also require that the oracle grid resolves K N.
  std::vector<std::string> problems(bool with_oracle = false) const {
    std::vector<std::string> e = params.problems();
    for (auto& s : step.problems()) e.push_back("step: " + s);
    if (grid.n_r < 4) e.emplace_back("grid.n_r must be >= 4");
    if (grid.n_z < 4 || grid.n_z % 2) e.emplace_back("grid.n_z must be even and >= 4");
    if (!(grid.L_z > 0.0)) e.emplace_back("grid.L_z must be > 0");
    if (run.snapshot_every < 1) e.emplace_back("run.snapshot_every must be >= 1");
    if (run.mode == RunMode::ns && params.nu != 1.0) e.emplace_back("run.mode = ns requires params.nu = 1");
    if (run.mode == RunMode::ans && params.nu != 0.0) e.emplace_back("run.mode = ans requires params.nu = 0");
    if (run.mode == RunMode::linear_flow && params.N < 3) e.emplace_back("run.mode = linear_flow requires N >= 3");
    if (run.pair_N != 0 && run.pair_N < 2) e.emplace_back("run.pair_N must be 0 or >= 2");
    const auto names = builtin_profile_names();
    if (profile.family != "random" && std::find(names.begin(), names.end(), profile.family) == names.end())
      e.emplace_back("profile.family must be one of the built-in families or 'random'");
    if (!(profile.amplitude >= 0.0)) e.emplace_back("profile.amplitude must be >= 0");
    for (auto& s : scan.problems()) e.push_back(s);
    if (stokes.states < 1) e.emplace_back("stokes.states must be >= 1");
    if (!(stokes.dt > 0.0) || !(stokes.T >= 0.0)) e.emplace_back("stokes: need dt > 0 and T >= 0");
    for (int k : stokes.modes)
      if (k < 0) e.emplace_back("stokes.modes must be >= 0");
    for (int k : stokes.leakage_modes)
      if (k < 0) e.emplace_back("stokes.leakage_modes must be >= 0");
    if (oracle.steps < 1) e.emplace_back("oracle.steps must be >= 1");
    if (!(oracle.dt > 0.0)) e.emplace_back("oracle.dt must be > 0");
    if (!(oracle.theta_scheme > 0.0 && oracle.theta_scheme <= 1.0))
      e.emplace_back("oracle.theta_scheme must lie in (0, 1]");
    const int nt = oracle.n_theta > 0 ? oracle.n_theta : 4 * params.K * params.N;
    if (with_oracle && (nt % 2 || nt > 128 || 2 * params.K * params.N >= nt))
      e.emplace_back("oracle: n_theta must be even, <= 128 and resolve K N (have " + std::to_string(nt) + ")");
    return e;
  }

  void validate(bool with_oracle = false) const {
    const auto e = problems(with_oracle);
    if (e.empty()) return;
    std::string msg = "invalid configuration:";
    for (const auto& s : e) msg += "\n  " + s;
    throw InvalidArgument(msg);
  }
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(unsigned long long v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "true" : "false"; }
inline std::string fmt(const std::string& v) { return v; }
inline std::string fmt(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline void parse(const std::string& s, double& v) {
  std::size_t pos = 0;
  v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument(s);
}
inline void parse(const std::string& s, int& v) {
  std::size_t pos = 0;
  v = std::stoi(s, &pos);
  if (pos != s.size()) throw std::invalid_argument(s);
}
inline void parse(const std::string& s, unsigned long long& v) {
  std::size_t pos = 0;
  v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::invalid_argument(s);
}
inline void parse(const std::string& s, bool& v) {
  if (s == "true" || s == "1") v = true;
  else if (s == "false" || s == "0") v = false;
  else throw std::invalid_argument(s);
}
inline void parse(const std::string& s, std::string& v) { v = s; }
inline void parse(const std::string& s, std::vector<int>& v) {
  v.clear();
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int x;
    parse(item, x);
    v.push_back(x);
  }
}

// Visits every (section, key, field) once, in serialization order.
template <class Cfg, class Fn>
void visit_fields(Cfg& c, Fn&& f) {
  f("params", "nu", c.params.nu);
  f("params", "N", c.params.N);
  f("params", "delta", c.params.delta);
  f("params", "eta", c.params.eta);
  f("params", "K", c.params.K);
  f("params", "m", c.params.m);
  f("params", "sigma", c.params.sigma);
  f("params", "small_eps", c.params.small_eps);
  f("grid", "n_r", c.grid.n_r);
  f("grid", "n_z", c.grid.n_z);
  f("grid", "L_z", c.grid.L_z);
  f("step", "dt", c.step.dt);
  f("step", "t_end", c.step.t_end);
  f("step", "cfl_safety", c.step.cfl_safety);
  f("step", "div_tol", c.step.div_tol);
  f("step", "budget_every", c.step.budget_every);
  f("step", "nonlinear", c.step.nonlinear);
  f("step", "cfl_every", c.step.cfl_every);
  f("step", "checkpoint_every", c.step.checkpoint_every);
  f("step", "checkpoint_path", c.step.checkpoint_path);
  f("step", "blowup_factor", c.step.blowup_factor);
  f("profile", "family", c.profile.family);
  f("profile", "amplitude", c.profile.amplitude);
  f("profile", "seed", c.profile.seed);
  f("run", "output_dir", c.run.output_dir);
  f("run", "snapshot_every", c.run.snapshot_every);
  f("run", "write_budget", c.run.write_budget);
  f("run", "write_history", c.run.write_history);
  f("run", "mixed_norms", c.run.mixed_norms);
  f("run", "pair_N", c.run.pair_N);
  f("scan", "p", c.scan.p);
  f("scan", "trials", c.scan.trials);
  f("scan", "seed", c.scan.seed);
  f("scan", "n_r", c.scan.n_r);
  f("scan", "n_theta", c.scan.n_theta);
  f("scan", "n_z", c.scan.n_z);
  f("scan", "max_degree", c.scan.max_degree);
  f("scan", "max_mode", c.scan.max_mode);
  f("scan", "zero_family", c.scan.zero_family);
  f("stokes", "T", c.stokes.T);
  f("stokes", "dt", c.stokes.dt);
  f("stokes", "states", c.stokes.states);
  f("stokes", "modes", c.stokes.modes);
  f("stokes", "leakage_modes", c.stokes.leakage_modes);
  f("stokes", "seed", c.stokes.seed);
  f("oracle", "amplitude", c.oracle.amplitude);
  f("oracle", "steps", c.oracle.steps);
  f("oracle", "dt", c.oracle.dt);
  f("oracle", "n_theta", c.oracle.n_theta);
  f("oracle", "theta_scheme", c.oracle.theta_scheme);
  f("oracle", "seed", c.oracle.seed);
}

}  // namespace detail

// Enum-valued keys are handled outside visit_fields.
inline boost::property_tree::ptree to_ptree(const ExperimentConfig& c) {
  boost::property_tree::ptree pt;
  detail::visit_fields(c, [&](const char* sec, const char* key, const auto& v) {
    pt.put(boost::property_tree::ptree::path_type(std::string(sec) + "/" + key, '/'), detail::fmt(v));
  });
  pt.put("grid.scheme", to_string(c.grid.scheme));
  pt.put("step.scheme", to_string(c.step.scheme));
  pt.put("run.mode", to_string(c.run.mode));
  pt.put("scan.check", to_string(c.scan.check));
  return pt;
}

inline std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  boost::property_tree::write_ini(os, to_ptree(c));
  return os.str();
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  boost::property_tree::ptree pt;
  std::istringstream is(text);
  try {
    boost::property_tree::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  std::vector<std::string> errs;
  std::set<std::string> known = {"grid.scheme", "step.scheme", "run.mode", "scan.check"};
  detail::visit_fields(c, [&](const char* sec, const char* key, auto& v) {
    const std::string path = std::string(sec) + "/" + key;
    known.insert(std::string(sec) + "." + key);
    auto node = pt.get_optional<std::string>(boost::property_tree::ptree::path_type(path, '/'));
    if (!node) return;
    try {
      detail::parse(*node, v);
    } catch (const std::exception&) {
      errs.push_back(std::string(sec) + "." + key + ": cannot parse '" + *node + "'");
    }
  });
  auto enum_key = [&](const char* path, auto conv) {
    if (auto v = pt.get_optional<std::string>(path)) {
      try {
        conv(*v);
      } catch (const std::exception& e) {
        errs.push_back(std::string(path) + ": " + e.what());
      }
    }
  };
  enum_key("grid.scheme", [&](const std::string& s) { c.grid.scheme = radial_scheme_from_string(s); });
  enum_key("step.scheme", [&](const std::string& s) { c.step.scheme = time_scheme_from_string(s); });
  enum_key("run.mode", [&](const std::string& s) { c.run.mode = run_mode_from_string(s); });
  enum_key("scan.check", [&](const std::string& s) { c.scan.check = inequality_check_from_string(s); });
  for (const auto& [sec, body] : pt) {
    if (body.empty() && !body.data().empty()) {
      errs.push_back("key '" + sec + "' outside any section");
      continue;
    }
    for (const auto& [key, val] : body)
      if (!known.count(sec + "." + key)) errs.push_back("unknown key '" + sec + "." + key + "'");
  }
  if (!errs.empty()) {
    std::string msg = "config errors:";
    for (const auto& s : errs) msg += "\n  " + s;
    throw InvalidArgument(msg);
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace cylmode
