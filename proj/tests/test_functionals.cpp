#include <gtest/gtest.h>

#include <random>

#include "cylmode/functionals.hpp"
#include "cylmode/profiles.hpp"
#include "cylmode/report.hpp"
#include "cylmode/stokes.hpp"

using namespace cylmode;

namespace {

GridPtr grid(int nr = 16, int nz = 8) { return CylGrid::build(nr, nz); }

Params params(int N = 8, int K = 3) {
  Params p;
  p.N = N;
  p.K = K;
  return p;
}

ModeState scaled(const ModeState& s, double a, double t) {
  ModeState out = s;
  for (auto& m : out.modes) m *= a;
  out.t = t;
  return out;
}

ModeNorms norms(double l2, double grad, double grad_r, double over_r) {
  ModeNorms n;
  n.l2 = l2;
  n.grad = grad;
  n.grad_r = grad_r;
  n.over_r = over_r;
  return n;
}

}  // namespace

TEST(Accumulate, ZeroStream) {
  auto g = grid();
  Params p = params();
  EnergyHistory h(p);
  for (int n = 0; n < 4; ++n) h.accumulate(scaled(ModeState::zero(g, p), 1.0, 0.1 * n));
  for (int k = 0; k <= p.K; ++k)
    for (int j = 0; j <= 1; ++j) {
      EXPECT_EQ(h.sup_l2(k, j), 0.0);
      EXPECT_EQ(h.integral(k, j).grad, 0.0);
      EXPECT_EQ(h.integral_error(k, j), 0.0);
    }
  EXPECT_EQ(compute_E(h, 0, p), 0.0);
  EXPECT_EQ(compute_D(h, 1, p), 0.0);
}

TEST(Accumulate, TimeMustIncrease) {
  auto g = grid();
  Params p = params();
  EnergyHistory h(p);
  h.accumulate(ModeState::zero(g, p));
  EXPECT_THROW(h.accumulate(ModeState::zero(g, p)), InvalidArgument);
  Params q = params(8, 4);
  EXPECT_THROW(h.accumulate(scaled(ModeState::zero(g, q), 1.0, 1.0)), InvalidArgument);
  EXPECT_THROW(EnergyHistory(p, 0), InvalidArgument);
}

TEST(Accumulate, ConstantStateIntegratesLinearly) {
  auto g = grid();
  Params p = params();
  std::mt19937_64 rng(1);
  ModeState s = random_state(rng, g, p, {0, 1, 2}, 1.0);
  EnergyHistory h(p);
  for (int n = 0; n <= 10; ++n) h.accumulate(scaled(s, 1.0, 0.03 * n));
  const double T = 0.3;
  for (int k = 0; k <= 2; ++k) {
    const auto n0 = mode_norms(s.modes[static_cast<std::size_t>(k)], 1);
    for (int j = 0; j <= 1; ++j) {
      const auto& I = h.integral(k, j);
      const auto& e = n0[static_cast<std::size_t>(j)];
      EXPECT_NEAR(I.l2, T * e.l2, 1e-12 * std::max(1.0, e.l2));
      EXPECT_NEAR(I.grad, T * e.grad, 1e-12 * std::max(1.0, e.grad));
      EXPECT_NEAR(I.over_r, T * e.over_r, 1e-12 * std::max(1.0, e.over_r));
      EXPECT_LT(h.integral_error(k, j), 1e-12 * std::max(1.0, e.grad));
    }
  }
}

TEST(Accumulate, DecayingMode) {
  // u(t) = exp(-lambda t) u0: int ||u||^2 = (1 - exp(-2 lambda T)) / (2 lambda) ||u0||^2
  auto g = grid();
  Params p = params();
  std::mt19937_64 rng(2);
  ModeState s = random_state(rng, g, p, {1}, 1.0);
  const double lambda = 3.0, T = 0.5;
  const double e0 = mode_norm2(s.modes[1]);
  for (double dt : {0.05, 0.025}) {
    EnergyHistory h(p);
    const int n = static_cast<int>(std::lround(T / dt));
    double prev = 0.0;
    for (int i = 0; i <= n; ++i) {
      h.accumulate(scaled(s, std::exp(-lambda * i * dt), i * dt));
      EXPECT_GE(h.integral(1, 0).l2, prev);
      prev = h.integral(1, 0).l2;
    }
    const double exact = (1 - std::exp(-2 * lambda * T)) / (2 * lambda) * e0;
    const double err = std::abs(h.integral(1, 0).l2 - exact);
    EXPECT_LE(err, dt * dt * e0 * 4 * lambda * lambda * T);
    // the recorded estimate sees the same dt^2 error
    EXPECT_GT(h.integral_error(1, 0), 0.5 * err);
    EXPECT_LT(h.integral_error(1, 0), 100 * dt * dt * e0 * 4 * lambda * lambda * T);
    EXPECT_DOUBLE_EQ(h.sup_l2(1, 0), mode_norms(s.modes[1], 1)[0].l2);
  }
}

TEST(Functionals, InitialData) {
  auto g = grid(20, 8);
  Params p = params(8, 4);
  auto prof = builtin_profile("axis_regular", g, 1.0);
  auto s = make_initial_state(prof, p);
  EnergyHistory h(p);
  h.accumulate(s);
  const auto n1 = mode_norms(s.modes[1], 1);
  for (int j = 0; j <= 1; ++j) {
    const double a = n1[static_cast<std::size_t>(j)].l2;
    EXPECT_NEAR(compute_E(h, j, p), std::pow(8.0, -2 * p.eta) * a, 1e-14 * a);
    EXPECT_NEAR(compute_D(h, j, p), std::pow(8.0, -2 * p.eta) * a, 1e-14 * a);
  }
  EXPECT_THROW(compute_E(h, 2, p), InvalidArgument);
  EXPECT_THROW(compute_D(h, -1, p), InvalidArgument);
  EXPECT_EQ(compute_E(EnergyHistory(p), 0, p), 0.0);
}

TEST(Functionals, SyntheticHistory) {
  Params p = params(4, 2);
  p.eta = 0.2;
  p.delta = 0.1;
  p.sigma = 0.45;
  EnergyHistory h(p);
  EnergyHistory::Raw r;
  r.times = {0.0, 1.0};
  r.sup = {{2.0, 3.0}, {0.5, 0.7}, {0.1, 0.2}};
  r.integ = {{norms(0, 1.5, 1.0, 0.25), norms(0, 2.5, 2.0, 0.5)},
             {norms(0, 0.3, 0.2, 0.01), norms(0, 0.4, 0.3, 0.02)},
             {norms(0, 0.05, 0.04, 0.002), norms(0, 0.06, 0.05, 0.003)}};
  r.last = r.integ;
  r.prev = r.integ;
  r.mixed_integ.assign(3, MixedNorms{});
  r.last_mixed.assign(3, MixedNorms{});
  r.series = {{2.0, 0.5, 0.1}, {2.0, 0.5, 0.1}};
  r.err = {{0, 0}, {0, 0}, {0, 0}};
  h.restore(r);

  // E_0 by hand: 4^{2(1/4-0.2)} (2 + 1.5 + 0.25) + max over k of
  // k^2 4^{0.4(k-2)} (sup + grad + k^2 16 / 2 over_r)
  const double mean = std::pow(4.0, 0.1) * (2.0 + 1.5 + 0.25);
  const double k1 = 1.0 * std::pow(4.0, -0.4) * (0.5 + 0.3 + 8.0 * 0.01);
  const double k2 = 4.0 * 1.0 * (0.1 + 0.05 + 32.0 * 0.002);
  EXPECT_NEAR(compute_E(h, 0, p), mean + std::max(k1, k2), 1e-14);

  // D_1: cap (1/2 - 0.2 - 0.1)(3 - 1) = 0.4, weights k^{2 0.45 2} 4^{2 min(0.2(k-2), 0.4)}
  const double dmean = std::pow(4.0, 0.1) * (3.0 + 2.0 + 0.5);
  const double d1 = 1.0 * std::pow(4.0, 2 * -0.2) * (0.7 + 0.3 + 8.0 * 0.02);
  const double d2 = std::pow(2.0, 1.8) * 1.0 * (0.2 + 0.05 + 32.0 * 0.003);
  EXPECT_NEAR(compute_D(h, 1, p), dmean + std::max(d1, d2), 1e-14);
}

TEST(Functionals, MonotoneAndHomogeneous) {
  auto g = grid(16, 8);
  Params p = params(4, 3);
  std::mt19937_64 rng(3);
  ModeState s = random_state(rng, g, p, {0, 1, 2, 3}, 1.0);
  StokesSolver S(g);
  auto tr = stokes_evolve(S, s, nullptr, 0.05, 0.01, WavenumberConvention::scaled, 1);
  EnergyHistory h(p), h3(p);
  double prevE = 0.0, prevD = 0.0;
  for (const auto& st : tr.states) {
    h.accumulate(st);
    h3.accumulate(scaled(st, 3.0, st.t));
    for (int j = 0; j <= 1; ++j) {
      EXPECT_NEAR(compute_E(h3, j, p), 9 * compute_E(h, j, p), 1e-12 * compute_E(h3, j, p));
      EXPECT_NEAR(compute_D(h3, j, p), 9 * compute_D(h, j, p), 1e-12 * compute_D(h3, j, p));
    }
    EXPECT_GE(compute_E(h, 0, p), prevE);
    EXPECT_GE(compute_D(h, 0, p), prevD);
    prevE = compute_E(h, 0, p);
    prevD = compute_D(h, 0, p);
  }
}

TEST(DecayWeights, Tables) {
  Params p = params(8, 8);
  auto w = decay_weights(p);
  EXPECT_NEAR(w.theta[2], std::pow(2.0, -p.sigma * p.m), 1e-15);
  EXPECT_NEAR(w.theta[1], std::pow(8.0, p.eta), 1e-14);
  EXPECT_EQ(w.A[0], 5);
  EXPECT_EQ(decay_threshold(p, 0), 5);
  for (int k = 1; k <= p.K; ++k) {
    const auto i = static_cast<std::size_t>(k);
    EXPECT_LE(w.theta[i], std::pow(k, -p.sigma * p.m) * std::pow(8.0, p.eta) * (1 + 1e-14));
    EXPECT_LE(w.theta_tilde[i], std::pow(k, -p.sigma * (p.m - 1)) * std::pow(8.0, p.eta) * (1 + 1e-14));
    EXPECT_LE(w.theta[i], std::pow(k, -p.sigma) * w.theta_tilde[i] * (1 + 1e-14));
  }
  ASSERT_EQ(w.A.size(), 4u);
  EXPECT_GE(w.A[0], w.A[1]);
  p.eta = 0.0;
  EXPECT_EQ(decay_threshold(p, 0), INT_MAX);
}

TEST(Smallness, Checks) {
  auto g = grid(20, 8);
  Params p = params(8, 4);
  auto z = smallness_check(builtin_profile("zero", g, 1.0), p);
  EXPECT_EQ(z.ns_lhs, 0.0);
  EXPECT_TRUE(z.ns_pass);
  EXPECT_TRUE(z.ans_pass);

  auto prof = builtin_profile("axis_regular", g, 1.0);
  auto a = smallness_check(prof, p);
  Params p16 = params(16, 4);
  auto b = smallness_check(prof, p16);
  // both exponents equal 1/4 at eta = 1/4, delta = 0
  EXPECT_NEAR(b.ns_lhs / a.ns_lhs, std::pow(2.0, -0.25), 1e-14);

  // measured on axis_regular, N = 8; unchanged on a (40, 16) grid
  EXPECT_NEAR(a.ns_lhs, 0.67486951348004753, 1e-12);
  EXPECT_NEAR(a.ans_lhs2, 0.5 * a.ns_lhs, 1e-15);
  EXPECT_THROW(smallness_check(std::vector<double>{1.0, 1.0}, p), InvalidArgument);

  p.eta = 0.1;
  p16.eta = 0.1;
  const double r = smallness_check(prof, p16).ns_lhs / smallness_check(prof, p).ns_lhs;
  EXPECT_LE(r, std::pow(2.0, -0.25) + 1e-14);
  EXPECT_GE(r, std::pow(2.0, -0.4) - 1e-14);
}

TEST(DecayReport, ZeroRun) {
  auto g = grid();
  Params p = params();
  EnergyHistory h(p);
  h.accumulate(ModeState::zero(g, p));
  h.accumulate(scaled(ModeState::zero(g, p), 1.0, 0.1));
  auto r = decay_report(h, p);
  for (const auto& row : r.rows) EXPECT_EQ(row.ratio, 0.0);
  EXPECT_TRUE(r.rate_pass[0]);
  EXPECT_TRUE(r.rate_pass[1]);
  EXPECT_THROW(decay_report(EnergyHistory(p), p), InvalidArgument);
}

TEST(DecayReport, StokesRunHasNoCascade) {
  auto g = grid(16, 8);
  Params p = params(4, 3);
  auto prof = builtin_profile("axis_regular", g, 1.0);
  auto s = make_initial_state(prof, p);
  StokesSolver S(g);
  auto tr = stokes_evolve(S, s, nullptr, 0.05, 0.01, WavenumberConvention::scaled, 1);
  EnergyHistory h(p);
  h.profile_norms = profile_dz_norms(prof, p.m + 1);
  for (const auto& st : tr.states) h.accumulate(st);
  auto r = decay_report(h, p);
  EXPECT_TRUE(r.no_cascade);
  EXPECT_EQ(r.truncation_leakage, 0.0);
  EXPECT_EQ(r.N, 4);
  EXPECT_EQ(r.snapshots, 6);
  EXPECT_NEAR(r.horizon, 0.05, 1e-15);
  for (const auto& row : r.rows) {
    EXPECT_TRUE(std::isfinite(row.ratio));
    if (row.k == 1) EXPECT_NEAR(row.ratio, 1.0, 1e-12);
  }
  const auto j = to_json(r, p);
  for (const char* key : {"params", "per_mode", "ratios", "pass_flags", "metadata"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j.dump(), to_json(decay_report(h, p), p).dump());
  EXPECT_EQ(decay_csv(r).substr(0, 24), "k,j,sup_norm,bound,ratio");
}

TEST(DecayReport, FittedSlope) {
  const std::vector<int> k = {2, 3, 4};
  const std::vector<double> y = {std::exp(-1.0), std::exp(-3.0), std::exp(-5.0)};
  EXPECT_NEAR(fitted_log_slope(k, y), -2.0, 1e-14);
  EXPECT_TRUE(std::isnan(fitted_log_slope({2}, {1.0})));
}

TEST(Lemma33, Table) {
  Params p = params(4, 2);
  EnergyHistory off(p);
  EXPECT_THROW(lemma33_bounds(off, p), InvalidArgument);
  EnergyHistory z(p, 1, true);
  z.accumulate(ModeState::zero(grid(), p));
  auto t0 = lemma33_bounds(z, p);
  EXPECT_EQ(t0.eq38[0], 0.0);
  EXPECT_EQ(t0.eq39[0][1], 0.0);

  // single-mode Stokes run, refined once in r
  std::vector<double> r39;
  for (int nr : {16, 32}) {
    auto g = grid(nr, 8);
    auto s = make_initial_state(builtin_profile("axis_regular", g, 1.0), p);
    StokesSolver S(g);
    auto tr = stokes_evolve(S, s, nullptr, 0.05, 0.005, WavenumberConvention::scaled, 1);
    EnergyHistory h(p, 1, true);
    for (const auto& st : tr.states) h.accumulate(st);
    auto t = lemma33_bounds(h, p);
    EXPECT_TRUE(std::isfinite(t.eq39[0][1]));
    EXPECT_GT(t.eq39[0][1], 0.0);
    EXPECT_TRUE(std::isfinite(t.eq310c[1]));
    r39.push_back(t.eq39[0][1]);
  }
  EXPECT_NEAR(r39[1] / r39[0], 1.0, 0.3);
}

TEST(History, JsonRoundTrip) {
  auto g = grid();
  Params p = params(4, 2);
  std::mt19937_64 rng(4);
  ModeState s = random_state(rng, g, p, {0, 1, 2}, 1.0);
  EnergyHistory h(p, 1, true);
  h.profile_norms = {1.0, 2.0, 3.0, 4.0, 5.0};
  for (int n = 0; n < 4; ++n) h.accumulate(scaled(s, std::exp(-0.5 * n), 0.1 * n));
  const auto back = history_from_json(json::parse(to_json(h).dump()));
  EXPECT_EQ(to_json(back).dump(), to_json(h).dump());
  EXPECT_EQ(compute_E(back, 1, p), compute_E(h, 1, p));
  EXPECT_EQ(back.integral_error(1, 0), h.integral_error(1, 0));
  // accumulation continues identically after a reload
  EnergyHistory a = h, b = back;
  a.accumulate(scaled(s, 0.1, 1.0));
  b.accumulate(scaled(s, 0.1, 1.0));
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_THROW(history_from_json(json{{"kind", "other"}}), IoError);
}
