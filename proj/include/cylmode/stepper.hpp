#pragma once

// IMEX time integration of the coupled mode system: explicit quadratic terms
// and transport, implicit per-mode Stokes solve with k_eff = kN.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cylmode/checkpoint.hpp"
#include "cylmode/errors.hpp"
#include "cylmode/nonlinear.hpp"
#include "cylmode/parallel.hpp"
#include "cylmode/state.hpp"
#include "cylmode/stokes.hpp"

namespace cylmode {

enum class TimeScheme { imex_euler, imex_bdf2 };

inline std::string to_string(TimeScheme s) { return s == TimeScheme::imex_euler ? "imex_euler" : "imex_bdf2"; }

inline TimeScheme time_scheme_from_string(const std::string& s) {
  if (s == "imex_euler" || s == "euler") return TimeScheme::imex_euler;
  if (s == "imex_bdf2" || s == "bdf2") return TimeScheme::imex_bdf2;
  throw InvalidArgument("unknown time scheme '" + s + "'");
}

struct StepConfig {
  double dt = 1e-3;
  double t_end = 0.1;
  double cfl_safety = 0.5;
  TimeScheme scheme = TimeScheme::imex_euler;
  double div_tol = 1e-9;
  int budget_every = 1;
  bool nonlinear = true;
  int cfl_every = 10;
  int checkpoint_every = 0;  // steps; 0 disables
  std::string checkpoint_path;  // "{step}" is replaced by the step number
  double blowup_factor = 10.0;

  std::vector<std::string> problems() const {
    std::vector<std::string> e;
    if (!(dt > 0.0)) e.emplace_back("dt must be > 0");
    if (!(t_end >= 0.0)) e.emplace_back("t_end must be >= 0");
    if (!(cfl_safety > 0.0 && cfl_safety <= 1.0)) e.emplace_back("cfl_safety must lie in (0, 1]");
    if (!(div_tol > 0.0)) e.emplace_back("div_tol must be > 0");
    if (budget_every < 1) e.emplace_back("budget_every must be >= 1");
    if (cfl_every < 1) e.emplace_back("cfl_every must be >= 1");
    if (checkpoint_every < 0) e.emplace_back("checkpoint_every must be >= 0");
    if (checkpoint_every > 0 && checkpoint_path.empty())
      e.emplace_back("checkpoint_path required when checkpoint_every > 0");
    return e;
  }
  void validate() const {
    const auto e = problems();
    if (e.empty()) return;
    std::string msg = "invalid step config:";
    for (const auto& s : e) msg += "\n  " + s;
    throw InvalidArgument(msg);
  }
};

// Largest stable explicit step and the mode that limits it.
struct CflEstimate {
  double dt_max = kInf;
  int limiting_mode = -1;
};

inline CflEstimate cfl_estimate(const ModeState& s, double safety) {
  const CylGrid& g = *s.grid;
  double dr = kInf;
  for (int i = 0; i + 1 < g.n_r(); ++i) dr = std::min(dr, g.r()(i + 1) - g.r()(i));
  dr = std::min(dr, g.r()(0));
  const double dz = g.L_z() / g.n_z();
  const double dth = 2.0 * kPi / (static_cast<double>(s.K()) * s.params.N);
  // bound on |u| by summing the absolute coefficients over modes
  Array2D ur = Array2D::Zero(g.n_r(), g.n_z()), uz = ur, ut = ur;
  std::vector<double> share(s.modes.size(), 0.0);
  for (const auto& m : s.modes) {
    Array2D a = m.ur().values().abs(), b = m.uz().values().abs(), c = m.uth().values().abs();
    if (m.k() > 0) {
      a += m.vr().values().abs();
      b += m.vz().values().abs();
      c += m.vth().values().abs();
    }
    ur += a;
    uz += b;
    ut += c;
    share[static_cast<std::size_t>(m.k())] =
        std::max({a.maxCoeff() / dr, b.maxCoeff() / dz,
                  (c.colwise() * g.inv_r().array()).maxCoeff() / dth});
  }
  const double rate = std::max({ur.maxCoeff() / dr, uz.maxCoeff() / dz,
                                (ut.colwise() * g.inv_r().array()).maxCoeff() / dth});
  CflEstimate e;
  if (rate > 0.0) {
    e.dt_max = safety / rate;
    e.limiting_mode = static_cast<int>(std::max_element(share.begin(), share.end()) - share.begin());
  }
  return e;
}

struct ModeBudget {
  int k = 0;
  double energy = 0.0;         // ||u_k||^2 after the step
  double dissipation_r = 0.0;  // ||d_r u_k||^2
  double dissipation_z = 0.0;  // nu^2 ||d_z u_k||^2
  double weighted_r = 0.0;     // 1/r part of the dissipation, (kN)^2 weights and cross terms included
  double transfer = 0.0;       // (N_k | u_k) at the old level
  double forcing_work = 0.0;   // (f_k | u_k) at the new level
  double pressure_work = 0.0;  // (grad P_k | u_k) = -(P_k | div u_k)
  double imbalance = 0.0;      // discrete energy equation residual
};

struct BudgetRecord {
  double t = 0.0;
  std::vector<ModeBudget> modes;
  int cleanups = 0;

  // Physical (theta-averaged) sum of the transfers.
  double total_transfer() const {
    double s = 0.0;
    for (const auto& m : modes) s += mode_energy_weight(m.k) * m.transfer;
    return s;
  }
};

// Per-mode energy ledger of one backward-Euler-type step. The imbalance is
// (E1 - E0 + ||u1 - u0||^2) / (2 dt) + a(u1) - (N | u1) - (f | u1), which
// vanishes for imex_euler; transfer is reported at the old level so that it
// sums to the flux identity.
inline BudgetRecord energy_budget(const ModeState& before, const ModeState& after,
                                  const std::vector<ModeVelocity>& nonlinear,
                                  const std::vector<ModeVelocity>* forcing, double dt) {
  BudgetRecord rec;
  rec.t = after.t;
  const double nu = after.params.nu;
  rec.modes.resize(after.modes.size());
  parallel_for(after.modes.size(), [&](std::size_t i) {
    const int k = static_cast<int>(i);
    const ModeVelocity& u0 = before.modes[i];
    const ModeVelocity& u1 = after.modes[i];
    const double kn = mode_wavenumber(k, after.params.N);
    ModeBudget b;
    b.k = k;
    b.energy = mode_norm2(u1);
    const DissipationParts d = dissipation_parts(u1, kn, nu);
    b.dissipation_r = d.grad_r;
    b.dissipation_z = d.grad_z;
    b.weighted_r = d.over_r + d.cross;
    b.transfer = nonlinear.empty() ? 0.0 : mode_inner(nonlinear[i], u0);
    const double transfer_new = nonlinear.empty() ? 0.0 : mode_inner(nonlinear[i], u1);
    b.forcing_work = forcing && !forcing->empty() ? mode_inner((*forcing)[i], u1) : 0.0;
    const auto div = mode_divergence(u1, after.params.N);
    for (std::size_t f = 0; f < div.size(); ++f)
      b.pressure_work -= kThetaMeasure * inner(after.pressures[i].c[f], div[f]);
    const double e0 = mode_norm2(u0);
    b.imbalance = (b.energy - e0 + mode_norm2(u1 - u0)) / (2.0 * dt) + d.total() - transfer_new -
                  b.forcing_work;
    rec.modes[i] = b;
  });
  return rec;
}

inline void write_budget_header(std::ostream& os) {
  os << "t,k,energy,dissipation_r,dissipation_z,weighted_r,transfer,pressure_work,imbalance\n";
}

inline void write_budget_rows(std::ostream& os, const BudgetRecord& r) {
  std::ostringstream line;
  line << std::setprecision(17);
  for (const auto& m : r.modes)
    line << r.t << ',' << m.k << ',' << m.energy << ',' << m.dissipation_r << ','
         << m.dissipation_z << ',' << m.weighted_r << ',' << m.transfer << ','
         << m.pressure_work << ',' << m.imbalance << '\n';
  os << line.str();
}

// Time stepper with its factorization cache and multistep history.
class Stepper {
 public:
  Stepper(GridPtr grid, StepConfig cfg) : solver_(std::make_shared<StokesSolver>(grid)), cfg_(std::move(cfg)) {
    cfg_.validate();
  }
  Stepper(std::shared_ptr<StokesSolver> solver, StepConfig cfg) : solver_(std::move(solver)), cfg_(std::move(cfg)) {
    cfg_.validate();
  }

  const StepConfig& config() const { return cfg_; }
  const StokesSolver& solver() const { return *solver_; }

  // Extra explicit forcing f(t), added at the old time level.
  void set_forcing(ForcingFn f) { forcing_ = std::move(f); }

  // Forget the multistep history (next bdf2 step bootstraps with Euler).
  void reset() {
    prev_.reset();
    prev_rhs_.clear();
    steps_ = 0;
    consecutive_cleanups_ = 0;
  }

  long steps_taken() const { return steps_; }
  int total_cleanups() const { return total_cleanups_; }
  const std::optional<BudgetRecord>& last_budget() const { return budget_; }

  ModeState step(const ModeState& s) {
    const double dt = cfg_.dt;
    if (cfg_.nonlinear && steps_ % cfg_.cfl_every == 0) {
      const CflEstimate c = cfl_estimate(s, cfg_.cfl_safety);
      if (dt > c.dt_max) {
        std::ostringstream msg;
        msg << "CFL violation at t = " << s.t << ": dt = " << dt << " exceeds " << c.dt_max
            << " (limiting mode " << c.limiting_mode << ")";
        throw CflViolation(msg.str(), c.limiting_mode, c.dt_max);
      }
    }
    // explicit terms at t^n
    std::vector<ModeVelocity> nl;
    if (cfg_.nonlinear) nl = explicit_rhs(s);
    std::vector<ModeVelocity> ex = nl;
    std::vector<ModeVelocity> fo;
    if (forcing_) fo = forcing_(s.t);
    if (ex.empty()) {
      for (const auto& m : s.modes) ex.emplace_back(m.k(), s.grid);
    }
    if (!fo.empty())
      for (std::size_t k = 0; k < ex.size(); ++k) ex[k] += fo[k];

    const bool bdf2 = cfg_.scheme == TimeScheme::imex_bdf2 && prev_.has_value();
    ModeState out = s;
    out.t = s.t + dt;
    std::vector<int> cleaned(s.modes.size(), 0);
    parallel_for(s.modes.size(), [&](std::size_t i) {
      const int k = s.modes[i].k();
      const double kn = mode_wavenumber(k, s.params.N);
      ModeVelocity g;
      double alpha;
      if (bdf2) {
        g = (2.0 / dt) * s.modes[i];
        g -= (0.5 / dt) * prev_->modes[i];
        g += 2.0 * ex[i];
        g -= prev_rhs_[i];
        alpha = 1.5 / dt;
      } else {
        g = (1.0 / dt) * s.modes[i];
        g += ex[i];
        alpha = 1.0 / dt;
      }
      auto [u, p] = solve_mode(*solver_, g, kn, s.params.nu, alpha, 1.0);
      if (mode_divergence_residual(u, s.params.N) > cfg_.div_tol) {
        u = project_divfree(*solver_, u, kn);
        cleaned[i] = 1;
      }
      out.modes[i] = std::move(u);
      out.pressures[i] = std::move(p);
    });
    const int cleanups = std::accumulate(cleaned.begin(), cleaned.end(), 0);
    total_cleanups_ += cleanups;
    consecutive_cleanups_ = cleanups > 0 ? consecutive_cleanups_ + 1 : 0;
    if (consecutive_cleanups_ > 3)
      throw Error("divergence cleanup needed on more than 3 consecutive steps at t = " +
                  std::to_string(out.t));
    for (std::size_t i = 0; i < out.modes.size(); ++i)
      if (mode_divergence_residual(out.modes[i], s.params.N) > cfg_.div_tol)
        throw Error("divergence residual above div_tol after cleanup, mode " + std::to_string(i));

    ++steps_;
    if (steps_ % cfg_.budget_every == 0) {
      budget_ = energy_budget(s, out, nl, fo.empty() ? nullptr : &fo, dt);
      budget_->cleanups = cleanups;
    } else {
      budget_.reset();
    }
    prev_ = s;
    prev_rhs_ = std::move(ex);
    return out;
  }

 private:
  std::shared_ptr<StokesSolver> solver_;
  StepConfig cfg_;
  ForcingFn forcing_;
  std::optional<ModeState> prev_;
  std::vector<ModeVelocity> prev_rhs_;
  long steps_ = 0;
  int consecutive_cleanups_ = 0;
  int total_cleanups_ = 0;
  std::optional<BudgetRecord> budget_;
};

// Convenience single step with a fresh stepper (Euler, or Euler bootstrap).
inline ModeState step(const ModeState& s, const StepConfig& cfg) {
  Stepper st(s.grid, cfg);
  return st.step(s);
}

struct RunSinks {
  std::function<void(const ModeState&)> on_snapshot;  // t = 0 and after every step
  std::function<void(const BudgetRecord&)> on_budget;
};

struct RunResult {
  ModeState final_state;
  long steps = 0;
  bool completed = true;
  bool blowup = false;
  double failure_time = std::numeric_limits<double>::quiet_NaN();
  std::string failure;
  std::string last_checkpoint;
  int cleanups = 0;
};

inline long step_count(double t_end, double dt) {
  return static_cast<long>(std::llround(t_end / dt));
}

inline std::string checkpoint_name(const std::string& pattern, long step) {
  std::string out = pattern;
  const auto pos = out.find("{step}");
  if (pos != std::string::npos) out.replace(pos, 6, std::to_string(step));
  return out;
}

// Steps to t_end with a fixed dt (t_end is rounded to a whole number of steps).
inline RunResult run(const ModeState& state0, Stepper& stepper, const RunSinks& sinks = {},
                     long first_step = 0) {
  const StepConfig& cfg = stepper.config();
  RunResult res;
  res.final_state = state0;
  const long n = step_count(cfg.t_end, cfg.dt);
  if (sinks.on_snapshot) sinks.on_snapshot(state0);
  const double e0 = total_energy(state0);
  for (long i = first_step; i < n; ++i) {
    try {
      ModeState next = stepper.step(res.final_state);
      res.final_state = std::move(next);
    } catch (const std::exception& e) {
      res.completed = false;
      res.failure_time = res.final_state.t;
      res.failure = e.what();
      break;
    }
    ++res.steps;
    if (sinks.on_snapshot) sinks.on_snapshot(res.final_state);
    if (sinks.on_budget && stepper.last_budget()) sinks.on_budget(*stepper.last_budget());
    if (cfg.checkpoint_every > 0 && (i + 1) % cfg.checkpoint_every == 0) {
      res.last_checkpoint = checkpoint_name(cfg.checkpoint_path, i + 1);
      save_checkpoint(res.last_checkpoint, res.final_state);
    }
    const double e = total_energy(res.final_state);
    if (!std::isfinite(e) || (e0 > 0.0 && e > cfg.blowup_factor * e0)) {
      res.completed = false;
      res.blowup = true;
      res.failure_time = res.final_state.t;
      res.failure = "energy grew beyond " + std::to_string(cfg.blowup_factor) + "x the initial value";
      break;
    }
  }
  res.cleanups = stepper.total_cleanups();
  return res;
}

inline RunResult run(const ModeState& state0, const StepConfig& cfg, const RunSinks& sinks = {}) {
  Stepper st(state0.grid, cfg);
  return run(state0, st, sinks);
}

}  // namespace cylmode
