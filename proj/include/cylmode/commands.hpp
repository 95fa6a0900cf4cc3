#pragma once

// Experiment drivers behind the command-line subcommands.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include "cylmode/checkpoint.hpp"
#include "cylmode/config.hpp"
#include "cylmode/functionals.hpp"
#include "cylmode/inequalities.hpp"
#include "cylmode/nonlinear.hpp"
#include "cylmode/oracle.hpp"
#include "cylmode/profiles.hpp"
#include "cylmode/report.hpp"
#include "cylmode/stepper.hpp"
#include "cylmode/stokes.hpp"

namespace cylmode {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitRuntime = 3 };

struct CommandOptions {
  std::string out_dir;  // overrides run.output_dir when non-empty
  bool quiet = false;
  std::string history_path;  // decay-report input
};

// ---------------------------------------------------------------------------
// Reusable checks.

struct StokesEnergyResult {
  double max_excess = 0.0;        // max_t (||w||^2 + 2 int a(w, w)) / ||w_in||^2 - 1
  double max_excess_bound = 0.0;  // same with the lower-bound dissipation of the Proposition
  bool monotone = true;           // ||w|| non-increasing step to step
};

// Random single-mode data at index k (plain wavenumber), zero forcing.
inline StokesEnergyResult stokes_energy_check(const std::shared_ptr<StokesSolver>& solver, double nu, int k,
                                              int trials, unsigned long long seed, double T, double dt) {
  const GridPtr g = solver->grid();
  Params p;
  p.nu = nu;
  p.K = std::max(k, 2);
  StokesEnergyResult res;
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(seed * 1000003ULL + static_cast<unsigned long long>(k * 131 + t));
    ModeState s = ModeState::zero(g, p);
    s.modes[static_cast<std::size_t>(k)] = random_mode(rng, g, k, 1, 1.0);
    const auto tr = stokes_evolve(*solver, s, {}, T, dt, WavenumberConvention::plain);
    const double e0 = tr.snapshots.front().modes[static_cast<std::size_t>(k)].energy;
    double prev = e0;
    for (const auto& sn : tr.snapshots) {
      const auto& r = sn.modes[static_cast<std::size_t>(k)];
      res.max_excess = std::max(res.max_excess, (r.energy + 2.0 * r.int_form) / e0 - 1.0);
      res.max_excess_bound = std::max(
          res.max_excess_bound, (r.energy + 2.0 * (r.int_grad_r + r.int_grad_z + r.int_weighted)) / e0 - 1.0);
      if (r.energy > prev) res.monotone = false;
      prev = r.energy;
    }
  }
  return res;
}

// Data and steady forcing on mode k0 only; largest relative content elsewhere.
inline double leakage_check(const std::shared_ptr<StokesSolver>& solver, int k0, int K, double nu,
                            unsigned long long seed, double T, double dt) {
  const GridPtr g = solver->grid();
  Params p;
  p.nu = nu;
  p.K = std::max(K, 2);
  std::mt19937_64 rng(seed + static_cast<unsigned long long>(k0));
  const ModeVelocity data = random_mode(rng, g, k0, 1, 1.0);
  const ModeVelocity force = random_mode(rng, g, k0, 1, 0.5);
  return mode_invariance_check(*solver, data, force, p, T, dt, WavenumberConvention::plain).leakage;
}

// Max node-wise |oracle projection - mode-side explicit terms| / scale, modes 0..K.
inline double sign_audit(const GridPtr& g, const Params& p, const std::vector<int>& active, std::mt19937_64& rng,
                         double amplitude = 0.5) {
  const ModeState s = random_state(rng, g, p, active, amplitude);
  const auto rhs = explicit_rhs(s);
  const FullField f = reconstruct_full(s, oracle_n_theta(p.K, p.N));
  double diff = 0.0, scale = 0.0;
  for (int k = 0; k <= p.K; ++k) {
    const ModeVelocity o = nonlinear_term_projection(f, k, p.N);
    for (std::size_t c = 0; c < o.size(); ++c) {
      diff = std::max(diff, (o[c] - rhs[static_cast<std::size_t>(k)][c]).max_abs());
      scale = std::max(scale, o[c].max_abs());
    }
  }
  return scale > 0.0 ? diff / scale : diff;
}

struct OracleCompareResult {
  double discrepancy = 0.0;       // relative L2 at dt
  double discrepancy_half = 0.0;  // relative L2 at dt / 2 (same horizon)
  double ratio() const { return discrepancy_half > 0.0 ? discrepancy / discrepancy_half : 0.0; }
  double full_divergence = 0.0;
  double T = 0.0;
};

namespace detail {
inline double oracle_vs_mode(const ModeState& s0, double dt, int steps, double theta, int n_theta,
                             double* full_div = nullptr) {
  StepConfig sc;
  sc.dt = dt;
  sc.t_end = dt * steps;
  sc.budget_every = 1 << 30;
  Stepper st(s0.grid, sc);
  OracleConfig oc;
  oc.dt = dt;
  oc.theta_scheme = theta;
  OracleSolver os(s0.grid, n_theta, s0.params, oc);
  ModeState m = s0;
  FullField f = reconstruct_full(s0, n_theta);
  for (int n = 0; n < steps; ++n) {
    m = st.step(m);
    f = os.step(f);
  }
  if (full_div) *full_div = full_divergence_residual(f);
  return mode_state_distance(project_to_modes(f, s0.params), m);
}
}  // namespace detail

// Mode-N data; mode solver (backward Euler) vs the full 3-D oracle.
inline OracleCompareResult oracle_compare(const GridPtr& g, const Params& p, double amplitude, double dt,
                                          int steps, double theta, int n_theta, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  const ModeState s0 = random_state(rng, g, p, {1}, amplitude);
  const int nt = n_theta > 0 ? n_theta : oracle_n_theta(p.K, p.N);
  OracleCompareResult r;
  r.T = dt * steps;
  r.discrepancy = detail::oracle_vs_mode(s0, dt, steps, theta, nt, &r.full_divergence);
  r.discrepancy_half = detail::oracle_vs_mode(s0, 0.5 * dt, 2 * steps, theta, nt);
  return r;
}

// ---------------------------------------------------------------------------
// Shared setup.

inline GridPtr make_grid(const GridConfig& c) { return CylGrid::build(c.n_r, c.n_z, c.L_z, c.scheme); }

inline InitProfile make_profile(const ProfileConfig& c, const GridPtr& g) {
  if (c.family == "random") {
    std::mt19937_64 rng(c.seed);
    return random_profile(rng, g, c.amplitude);
  }
  return builtin_profile(c.family, g, c.amplitude);
}

inline std::string resolve_out(const ExperimentConfig& c, const CommandOptions& o) {
  const std::string dir = o.out_dir.empty() ? c.run.output_dir : o.out_dir;
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline json decay_json(const EnergyHistory& h, const ExperimentConfig& c) {
  json j = report_envelope("decay-report", c);
  j["decay"] = to_json(decay_report(h, h.params()), h.params());
  return j;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulationOutcome {
  RunResult run;
  EnergyHistory history;
  double max_divergence = 0.0;
  double max_flux_residual = 0.0;
  double max_E0_ratio = 0.0;  // max_t E_0(t) / E_0(0)
  bool dissipative = true;
  double E0_initial = 0.0, E1_initial = 0.0, D0_initial = 0.0, D1_initial = 0.0;
};

inline SimulationOutcome simulate(const ExperimentConfig& c, const InitProfile& profile, const GridPtr& g,
                                  std::ostream* budget_csv = nullptr) {
  Params p = c.params;
  StepConfig sc = c.step;
  if (c.run.mode == RunMode::stokes_only) sc.nonlinear = false;
  const ModeState s0 = make_initial_state(profile, p, g);
  SimulationOutcome out;
  out.history = EnergyHistory(p, 1, c.run.mixed_norms);
  out.history.profile_norms = profile_dz_norms(profile, p.m + 1);
  out.history.snapshot_cadence = c.run.snapshot_every;
  const long n_steps = step_count(sc.t_end, sc.dt);
  long calls = 0;
  double last_energy = total_energy(s0);
  RunSinks sinks;
  sinks.on_snapshot = [&](const ModeState& s) {
    const long i = calls++;
    for (double d : divergence_residual(s)) out.max_divergence = std::max(out.max_divergence, d);
    const double e = total_energy(s);
    if (e > last_energy * (1.0 + 1e-12)) out.dissipative = false;
    last_energy = e;
    if (i % c.run.snapshot_every != 0 && i != n_steps) return;
    if (sc.nonlinear) out.max_flux_residual = std::max(out.max_flux_residual, flux_identity_residual(s));
    out.history.accumulate(s);
    const double E0 = compute_E(out.history, 0, p);
    if (i == 0) {
      out.E0_initial = E0;
      out.E1_initial = compute_E(out.history, 1, p);
      out.D0_initial = compute_D(out.history, 0, p);
      out.D1_initial = compute_D(out.history, 1, p);
    }
    if (out.E0_initial > 0.0) out.max_E0_ratio = std::max(out.max_E0_ratio, E0 / out.E0_initial);
  };
  if (budget_csv) {
    write_budget_header(*budget_csv);
    sinks.on_budget = [&](const BudgetRecord& r) { write_budget_rows(*budget_csv, r); };
  }
  Stepper st(g, sc);
  out.run = run(s0, st, sinks);
  return out;
}

// sup_t ||u_0|| / ||alpha||
inline double mean_mode_ratio(const SimulationOutcome& o) {
  const double a = o.history.profile_norms.empty() ? 0.0 : o.history.profile_norms[0];
  return a > 0.0 ? std::sqrt(o.history.sup_l2(0, 0)) / a : 0.0;
}

inline int cmd_linear_flow(const ExperimentConfig& c, const CommandOptions& o);

inline int cmd_simulate(const ExperimentConfig& c, const CommandOptions& o) {
  c.validate();
  if (c.run.mode == RunMode::linear_flow) return cmd_linear_flow(c, o);
  const std::string dir = resolve_out(c, o);
  ExperimentConfig cc = c;
  if (!cc.step.checkpoint_path.empty() && !std::filesystem::path(cc.step.checkpoint_path).is_absolute())
    cc.step.checkpoint_path = join(dir, cc.step.checkpoint_path);
  const GridPtr g = make_grid(c.grid);
  const InitProfile profile = make_profile(c.profile, g);
  const SmallnessResult small = smallness_check(profile, c.params);
  std::unique_ptr<std::ofstream> csv;
  if (c.run.write_budget) csv = std::make_unique<std::ofstream>(join(dir, "budget.csv"));
  const SimulationOutcome out = simulate(cc, profile, g, csv.get());
  const Params& p = c.params;
  const bool nl = c.step.nonlinear && c.run.mode != RunMode::stokes_only;

  json rep = report_envelope("simulate", c);
  rep["smallness"] = to_json(small);
  rep["initial"] = {{"E0", out.E0_initial}, {"E1", out.E1_initial}, {"D0", out.D0_initial}, {"D1", out.D1_initial}};
  rep["final"] = {{"t", out.run.final_state.t},
                  {"E0", compute_E(out.history, 0, p)},
                  {"E1", compute_E(out.history, 1, p)},
                  {"D0", compute_D(out.history, 0, p)},
                  {"D1", compute_D(out.history, 1, p)},
                  {"max_E0_ratio", out.max_E0_ratio}};
  rep["run"] = {{"completed", out.run.completed},
                {"steps", out.run.steps},
                {"blowup", out.run.blowup},
                {"failure", out.run.failure},
                {"failure_time", num(out.run.failure_time)},
                {"cleanups", out.run.cleanups},
                {"last_checkpoint", out.run.last_checkpoint}};
  const bool div_ok = out.max_divergence <= c.step.div_tol;
  const bool flux_ok = !nl || out.max_flux_residual <= 1e-8;
  const bool diss_ok = c.run.mode != RunMode::stokes_only || out.dissipative;
  rep["invariants"] = {{"max_divergence", out.max_divergence},
                       {"divergence_ok", div_ok},
                       {"max_flux_residual", out.max_flux_residual},
                       {"flux_ok", flux_ok},
                       {"dissipative", out.dissipative},
                       {"dissipative_ok", diss_ok}};
  const DecayReport dr = decay_report(out.history, p);
  rep["decay"] = to_json(dr, p);
  if (c.run.mixed_norms) rep["lemma33"] = to_json(lemma33_bounds(out.history, p));
  if (c.run.pair_N > 0) {
    ExperimentConfig c2 = cc;
    c2.params.N = c.run.pair_N;
    c2.step.checkpoint_every = 0;
    const SimulationOutcome o2 = simulate(c2, profile, g);
    const double r1 = mean_mode_ratio(out), r2 = mean_mode_ratio(o2);
    const double expo = (r1 > 0.0 && r2 > 0.0) ? std::log(r2 / r1) / std::log(double(c2.params.N) / p.N) : 0.0;
    rep["n_scaling"] = {{"N", {p.N, c2.params.N}},
                        {"mean_ratio", {r1, r2}},
                        {"fitted_exponent", expo},
                        {"predicted_exponent", -0.25 + p.delta},
                        {"paired_completed", o2.run.completed}};
  }
  write_json(join(dir, "report.json"), rep);
  write_json(join(dir, "decay.json"), decay_json(out.history, c));
  write_text(join(dir, "decay.csv"), decay_csv(dr));
  if (c.run.write_history) write_json(join(dir, "history.json"), to_json(out.history));
  save_checkpoint(join(dir, "final.ckpt"), out.run.final_state);
  const bool ok = out.run.completed && div_ok && flux_ok && diss_ok;
  if (!o.quiet) {
    std::cout << "simulate: " << (ok ? "ok" : "FAILED") << ", steps " << out.run.steps << ", t = "
              << out.run.final_state.t << ", max div " << out.max_divergence << ", max flux residual "
              << out.max_flux_residual << "\n";
    if (!out.run.completed) std::cout << "  failure: " << out.run.failure << "\n";
  }
  return ok ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// stokes-test

inline int cmd_stokes_test(const ExperimentConfig& c, const CommandOptions& o) {
  c.validate();
  const std::string dir = resolve_out(c, o);
  const GridPtr g = make_grid(c.grid);
  auto solver = std::make_shared<StokesSolver>(g);
  json rep = report_envelope("stokes-test", c);
  bool ok = true;
  json energy = json::array();
  for (double nu : {0.0, 1.0}) {
    for (int k : c.stokes.modes) {
      const auto r = stokes_energy_check(solver, nu, k, c.stokes.states, c.stokes.seed, c.stokes.T, c.stokes.dt);
      const bool pass = r.max_excess <= 1e-10 && r.max_excess_bound <= 1e-10 && r.monotone;
      ok = ok && pass;
      energy.push_back({{"nu", nu}, {"k", k}, {"max_excess", r.max_excess},
                        {"max_excess_bound", r.max_excess_bound}, {"monotone", r.monotone}, {"pass", pass}});
    }
  }
  rep["energy_inequality"] = energy;
  json leak = json::array();
  int K = 2;
  for (int k : c.stokes.leakage_modes) K = std::max(K, k);
  for (int k0 : c.stokes.leakage_modes) {
    const double l = leakage_check(solver, k0, K, c.params.nu, c.stokes.seed, c.stokes.T, c.stokes.dt);
    const bool pass = l <= 1e-12;
    ok = ok && pass;
    leak.push_back({{"k0", k0}, {"leakage", l}, {"pass", pass}});
  }
  rep["mode_invariance"] = leak;
  // discrete energy identity of a forced step, cross terms included
  json ident = json::array();
  std::mt19937_64 rng(c.stokes.seed);
  for (int k : c.stokes.modes) {
    const ModeVelocity w = random_mode(rng, g, k, 1, 1.0), f = random_mode(rng, g, k, 1, 0.5);
    const double dt = c.stokes.dt, ke = k;
    const auto [u, pr] = stokes_step(*solver, w, f, ke, c.params.nu, dt);
    const double lhs = mode_norm2(u) - mode_norm2(w) + mode_norm2(u - w) +
                       2.0 * dt * dissipation_parts(u, ke, c.params.nu).total();
    const double rhs = 2.0 * dt * mode_inner(f, u);
    const double rel = std::abs(lhs - rhs) / mode_norm2(w);
    const bool pass = rel <= 1e-10 && mode_divergence_residual(u, 1) <= 1e-9;
    ok = ok && pass;
    ident.push_back({{"k", k}, {"relative_residual", rel}, {"pass", pass}});
  }
  rep["energy_identity"] = ident;
  rep["pass"] = ok;
  write_json(join(dir, "stokes_test.json"), rep);
  if (!o.quiet) std::cout << "stokes-test: " << (ok ? "all checks passed" : "FAILED") << "\n";
  return ok ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// linear-flow

inline int cmd_linear_flow(const ExperimentConfig& c, const CommandOptions& o) {
  c.validate();
  if (c.params.N < 3) throw InvalidArgument("linear-flow requires N >= 3");
  const std::string dir = resolve_out(c, o);
  const GridPtr g = make_grid(c.grid);
  StokesSolver solver(g);
  const InitProfile profile = make_profile(c.profile, g);
  const LinearFlowReport r = linear_flow_uL(solver, profile, c.params, c.step.t_end, c.step.dt);
  json rep = report_envelope("linear-flow", c);
  rep["linear_flow"] = to_json(r);
  write_json(join(dir, "linear_flow.json"), rep);
  bool finite = std::isfinite(r.identity_residual);
  for (const auto& row : r.rows) finite = finite && std::isfinite(row.ratio);
  if (!o.quiet) {
    std::cout << "linear-flow: identity residual " << r.identity_residual << "\n";
    for (const auto& row : r.rows) std::cout << "  j = " << row.j << "  ratio " << row.ratio << "\n";
  }
  return finite ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// inequality-scan

inline bool scan_passes(const ScanReport& r) {
  return std::isfinite(r.max_ratio) && std::isfinite(r.max_ratio_fine) && r.refinement_delta <= 0.10 &&
         r.pointwise_violations == 0 && r.poincare_max <= 2.0 * kPi;
}

inline int cmd_inequality_scan(const ExperimentConfig& c, const CommandOptions& o) {
  c.validate();
  const std::string dir = resolve_out(c, o);
  const ScanReport r = constant_scan(c.scan);
  json rep = report_envelope("inequality-scan", c);
  rep["scan"] = to_json(r);
  const bool ok = scan_passes(r);
  rep["pass"] = ok;
  write_json(join(dir, "scan_" + r.check + ".json"), rep);
  if (!o.quiet)
    std::cout << "inequality-scan " << r.check << " p = " << r.p << ": max " << r.max_ratio << ", median "
              << r.median_ratio << ", refinement delta " << r.refinement_delta << "\n";
  return ok ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// oracle-compare

inline int cmd_oracle_compare(const ExperimentConfig& c, const CommandOptions& o) {
  c.validate(true);
  const std::string dir = resolve_out(c, o);
  const GridPtr g = make_grid(c.grid);
  const auto r = oracle_compare(g, c.params, c.oracle.amplitude, c.oracle.dt, c.oracle.steps,
                                c.oracle.theta_scheme, c.oracle.n_theta, c.oracle.seed);
  std::mt19937_64 rng(c.oracle.seed);
  const double audit = sign_audit(g, c.params, {1, 2}, rng);
  json rep = report_envelope("oracle-compare", c);
  rep["trajectory"] = {{"T", r.T},
                       {"discrepancy", r.discrepancy},
                       {"discrepancy_half_dt", r.discrepancy_half},
                       {"ratio", r.ratio()},
                       {"oracle_divergence", r.full_divergence}};
  rep["sign_audit"] = {{"max_relative_nodewise", audit}};
  const bool ok = r.discrepancy <= 1e-2 && audit <= 1e-10;
  rep["pass"] = ok;
  write_json(join(dir, "oracle_compare.json"), rep);
  if (!o.quiet)
    std::cout << "oracle-compare: discrepancy " << r.discrepancy << " (dt/2: " << r.discrepancy_half
              << "), sign audit " << audit << "\n";
  return ok ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// decay-report

inline int cmd_decay_report(const ExperimentConfig& c, const CommandOptions& o) {
  c.validate();
  const std::string dir = resolve_out(c, o);
  const std::string path = o.history_path.empty() ? join(dir, "history.json") : o.history_path;
  const EnergyHistory h = history_from_json(read_json(path));
  write_json(join(dir, "decay.json"), decay_json(h, c));
  write_text(join(dir, "decay.csv"), decay_csv(decay_report(h, h.params())));
  if (!o.quiet) std::cout << "decay-report: wrote " << join(dir, "decay.json") << "\n";
  return kExitOk;
}

}  // namespace cylmode
