#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>

#include "cylmode/checkpoint.hpp"
#include "cylmode/oracle.hpp"
#include "cylmode/parallel.hpp"
#include "cylmode/profiles.hpp"
#include "cylmode/stepper.hpp"

using namespace cylmode;

namespace {

GridPtr grid(int nr = 20, int nz = 8) { return CylGrid::build(nr, nz); }

Params params(double nu = 1.0, int N = 4, int K = 3) {
  Params p;
  p.nu = nu;
  p.N = N;
  p.K = K;
  return p;
}

StepConfig config(double dt, double t_end, TimeScheme s = TimeScheme::imex_euler) {
  StepConfig c;
  c.dt = dt;
  c.t_end = t_end;
  c.scheme = s;
  return c;
}

bool identical(const ModeState& a, const ModeState& b) {
  for (std::size_t k = 0; k < a.modes.size(); ++k)
    for (std::size_t c = 0; c < a.modes[k].size(); ++c)
      if (!(a.modes[k][c].values() == b.modes[k][c].values()).all()) return false;
  return a.t == b.t;
}

// w*(t) = g(t) w0 with f = g' w0 + g A w0 - g^2 N(w0): exact for the full system.
double manufactured_error(TimeScheme scheme, double dt) {
  auto g = CylGrid::build(24, 16);
  Params p = params(1.0, 4, 3);
  std::mt19937_64 rng(5);
  ModeState w0 = random_state(rng, g, p, {0, 1, 2, 3}, 0.3);
  const auto nl0 = explicit_rhs(w0);
  StokesSolver S(g);
  std::vector<ModeVelocity> Aw;
  for (int k = 0; k <= p.K; ++k) Aw.push_back(apply_stokes_operator(S, w0.modes[static_cast<std::size_t>(k)], k * p.N, p.nu));
  auto gf = [](double t) { return 1.0 + 0.5 * std::sin(3 * t); };
  auto gp = [](double t) { return 1.5 * std::cos(3 * t); };
  StepConfig c = config(dt, 0.4, scheme);
  c.cfl_safety = 1.0;
  Stepper st(g, c);
  st.set_forcing([&](double t) {
    std::vector<ModeVelocity> f;
    for (int k = 0; k <= p.K; ++k) {
      const auto i = static_cast<std::size_t>(k);
      ModeVelocity v = gp(t) * w0.modes[i];
      v += gf(t) * Aw[i];
      v -= gf(t) * gf(t) * nl0[i];
      f.push_back(v);
    }
    return f;
  });
  ModeState s = w0;
  for (auto& m : s.modes) m *= gf(0.0);
  auto r = run(s, st);
  EXPECT_TRUE(r.completed) << r.failure;
  ModeState ex = w0;
  for (auto& m : ex.modes) m *= gf(r.final_state.t);
  return mode_state_distance(r.final_state, ex);
}

}  // namespace

TEST(Stepper, ZeroState) {
  auto g = grid();
  ModeState s = ModeState::zero(g, params());
  ModeState out = step(s, config(0.01, 1.0));
  EXPECT_DOUBLE_EQ(out.t, 0.01);
  for (const auto& m : out.modes) EXPECT_EQ(m.max_abs(), 0.0);
}

TEST(Stepper, ConfigValidation) {
  EXPECT_THROW(Stepper(grid(), config(0.0, 1.0)), InvalidArgument);
  EXPECT_THROW(Stepper(grid(), config(0.1, -1.0)), InvalidArgument);
  StepConfig c = config(0.1, 1.0);
  c.cfl_safety = 1.5;
  EXPECT_THROW(Stepper(grid(), c), InvalidArgument);
}

TEST(Stepper, StepKeepsConstraints) {
  auto g = grid(24, 16);
  std::mt19937_64 rng(1);
  ModeState s = random_state(rng, g, params(), {0, 1, 2, 3}, 0.3);
  ModeState out = step(s, config(1e-3, 1.0));
  for (double d : divergence_residual(out)) EXPECT_LE(d, 1e-9);
  for (const auto& m : out.modes)
    for (const auto& c : m.comps()) EXPECT_EQ(c.values().row(g->n_r() - 1).abs().maxCoeff(), 0.0);
}

TEST(Stepper, CflViolation) {
  auto g = grid();
  std::mt19937_64 rng(2);
  ModeState s = random_state(rng, g, params(), {0, 2}, 50.0);
  try {
    step(s, config(0.1, 1.0));
    FAIL() << "expected a CFL violation";
  } catch (const CflViolation& e) {
    EXPECT_GE(e.limiting_mode(), 0);
    EXPECT_LT(e.dt_max(), 0.1);
  }
  auto r = run(s, config(0.1, 0.5));
  EXPECT_FALSE(r.completed);
  EXPECT_EQ(r.failure_time, 0.0);
}

TEST(Stepper, SmallAmplitudeMatchesLinearFlow) {
  // nonlinear minus linear trajectory scales like eps^2
  auto g = grid(24, 16);
  Params p = params(0.0, 4, 3);
  auto prof = builtin_profile("two_wave", g, 1.0);
  auto diff = [&](double eps) {
    InitProfile q = prof;
    for (auto* f : {&q.a_r, &q.a_th, &q.a_z, &q.b_r, &q.b_th, &q.b_z}) *f *= eps;
    ModeState s = make_initial_state(q, p);
    StepConfig c = config(1e-3, 0.05);
    auto nl = run(s, c).final_state;
    c.nonlinear = false;
    auto lin = run(s, c).final_state;
    // the Stokes-only run is the linear flow u_L
    StokesSolver S(g);
    auto lf = linear_flow_uL(S, q, p, 0.05, 1e-3, 0);
    EXPECT_LT(mode_norm2(lin.modes[1] - lf.final_mode), 1e-26 * std::max(1.0, mode_norm2(lf.final_mode)) + 1e-30);
    double d = 0.0;
    for (std::size_t k = 0; k < nl.modes.size(); ++k) d += mode_norm2(nl.modes[k] - lin.modes[k]);
    return std::sqrt(d);
  };
  const double d1 = diff(1e-2), d2 = diff(5e-3);
  EXPECT_NEAR(d1 / d2, 4.0, 0.2);
}

TEST(Stepper, ViscosityIrrelevantForZIndependentData) {
  auto g = grid(20, 8);
  auto prof = builtin_profile("z_independent", g, 0.2);
  auto s1 = make_initial_state(prof, params(1.0));
  auto s0 = make_initial_state(prof, params(0.0));
  auto a = run(s1, config(1e-3, 0.02)).final_state;
  auto b = run(s0, config(1e-3, 0.02)).final_state;
  EXPECT_LT(mode_state_distance(a, b), 1e-13);
}

TEST(Stepper, ZeroHorizon) {
  auto g = grid();
  std::mt19937_64 rng(3);
  ModeState s = random_state(rng, g, params(), {1}, 0.1);
  auto r = run(s, config(1e-3, 0.0));
  EXPECT_EQ(r.steps, 0);
  EXPECT_TRUE(identical(r.final_state, s));
}

TEST(Stepper, RestartIsBitIdentical) {
  auto g = grid(20, 8);
  std::mt19937_64 rng(4);
  Params p = params(1.0, 4, 3);
  ModeState s = random_state(rng, g, p, {0, 1, 2}, 0.3);
  const auto dir = std::filesystem::temp_directory_path() / "cylmode_restart";
  std::filesystem::create_directories(dir);
  StepConfig c = config(2e-3, 0.04);
  c.checkpoint_every = 10;
  c.checkpoint_path = (dir / "step{step}.ckpt").string();
  auto full = run(s, c);
  ASSERT_TRUE(full.completed);
  ModeState half = load_checkpoint((dir / "step10.ckpt").string(), p);
  StepConfig c2 = c;
  c2.checkpoint_every = 0;
  Stepper st(g, c2);
  auto rest = run(half, st, {}, 10);
  EXPECT_EQ(rest.steps, 10);
  EXPECT_TRUE(identical(rest.final_state, full.final_state));
  std::filesystem::remove_all(dir);
}

TEST(Stepper, Determinism) {
  auto g = grid(20, 8);
  std::mt19937_64 rng(6);
  ModeState s = random_state(rng, g, params(), {0, 1, 2, 3}, 0.3);
  StepConfig c = config(2e-3, 0.02, TimeScheme::imex_bdf2);
  set_num_threads(1);
  auto a = run(s, c).final_state;
  auto b = run(s, c).final_state;
  EXPECT_TRUE(identical(a, b));
  set_num_threads(3);
  auto d = run(s, c).final_state;
  set_num_threads(1);
  EXPECT_LT(mode_state_distance(d, a), 1e-13);
}

TEST(Stepper, PressureGauge) {
  auto g = grid(20, 8);
  std::mt19937_64 rng(7);
  ModeState s = random_state(rng, g, params(), {0, 1, 2}, 0.3);
  ModeState t = s;
  t.pressures[0].c[0] += ScalarField::from_function(g, [](double, double) { return 3.7; });
  auto a = step(s, config(1e-3, 1.0));
  auto b = step(t, config(1e-3, 1.0));
  EXPECT_TRUE(identical(a, b));
}

TEST(Stepper, Bdf2BootstrapsWithEuler) {
  auto g = grid(20, 8);
  std::mt19937_64 rng(8);
  ModeState s = random_state(rng, g, params(), {0, 1}, 0.3);
  auto a = step(s, config(1e-3, 1.0, TimeScheme::imex_euler));
  auto b = step(s, config(1e-3, 1.0, TimeScheme::imex_bdf2));
  EXPECT_TRUE(identical(a, b));
}

TEST(Stepper, StokesOnlyDissipates) {
  auto g = grid(20, 8);
  std::mt19937_64 rng(9);
  ModeState s = random_state(rng, g, params(0.0), {0, 1, 2, 3}, 1.0);
  for (double dt : {1e-3, 1e-1, 10.0}) {
    StepConfig c = config(dt, 5 * dt);
    c.nonlinear = false;
    Stepper st(g, c);
    ModeState u = s;
    double e = total_energy(u);
    for (int n = 0; n < 5; ++n) {
      u = st.step(u);
      const double e1 = total_energy(u);
      EXPECT_LE(e1, e);
      e = e1;
      for (const auto& m : st.last_budget()->modes) EXPECT_EQ(m.transfer, 0.0);
    }
  }
}

TEST(Stepper, Budget) {
  auto g = grid(32, 16);
  std::mt19937_64 rng(10);
  Params p = params(1.0, 4, 3);
  ModeState s = random_state(rng, g, p, {0, 1, 2, 3}, 0.3);
  StepConfig c = config(1e-3, 0.01);
  Stepper st(g, c);
  ModeState u = s;
  for (int n = 0; n < 5; ++n) {
    const double e = total_energy(u);
    const double grad = std::sqrt(gradient_scale2(u));
    u = st.step(u);
    const auto& b = *st.last_budget();
    EXPECT_LE(std::abs(b.total_transfer()), 1e-8 * e * grad);
    for (const auto& m : b.modes) {
      EXPECT_LT(std::abs(m.imbalance), 1e-9 * std::max(1.0, m.dissipation_r)) << m.k;
      EXPECT_LE(std::abs(m.pressure_work), 10 * c.div_tol * std::max(1.0, m.energy));
    }
  }
  std::ostringstream os;
  write_budget_header(os);
  write_budget_rows(os, *st.last_budget());
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "t,k,energy,dissipation_r,dissipation_z,weighted_r,transfer,pressure_work,imbalance");
}

TEST(Stepper, SmallDataEnergySlack) {
  // per-step energy growth is bounded by C dt^2
  auto g = grid(24, 16);
  Params p = params(1.0, 8, 4);
  auto s = make_initial_state(builtin_profile("axis_regular", g, 0.05), p);
  for (double dt : {2e-3, 1e-3}) {
    StepConfig c = config(dt, 0.02);
    double worst = 0.0, prev = total_energy(s);
    RunSinks sinks;
    sinks.on_snapshot = [&](const ModeState& st) {
      const double e = total_energy(st);
      worst = std::max(worst, (e - prev) / (dt * dt));
      prev = e;
    };
    prev = total_energy(s);
    ASSERT_TRUE(run(s, c, sinks).completed);
    EXPECT_LE(worst, 1e-3 * total_energy(s) / (2e-3 * 2e-3));
  }
}

TEST(Stepper, BlowupFlagged) {
  auto g = grid(16, 8);
  std::mt19937_64 rng(11);
  ModeState s = random_state(rng, g, params(), {0, 1}, 0.3);
  StepConfig c = config(1e-3, 0.01);
  c.blowup_factor = 1e-6;  // any energy counts as growth
  c.nonlinear = false;
  Stepper st(g, c);
  st.set_forcing([&](double) {
    std::vector<ModeVelocity> f;
    for (const auto& m : s.modes) f.push_back(1e4 * m);
    return f;
  });
  auto r = run(s, st);
  EXPECT_TRUE(r.blowup);
  EXPECT_FALSE(r.completed);
  EXPECT_DOUBLE_EQ(r.failure_time, 1e-3);
}

TEST(Stepper, ManufacturedOrders) {
  for (auto scheme : {TimeScheme::imex_euler, TimeScheme::imex_bdf2}) {
    const double e1 = manufactured_error(scheme, 0.01);
    const double e2 = manufactured_error(scheme, 0.005);
    const double e3 = manufactured_error(scheme, 0.0025);
    const double want = scheme == TimeScheme::imex_euler ? 1.0 : 2.0;
    EXPECT_NEAR(std::log2(e1 / e2), want, 0.3) << to_string(scheme);
    EXPECT_NEAR(std::log2(e2 / e3), want, 0.3) << to_string(scheme);
  }
}
