#include <gtest/gtest.h>

#include <random>

#include "cylmode/nonlinear.hpp"
#include "cylmode/oracle.hpp"
#include "cylmode/profiles.hpp"

using namespace cylmode;

namespace {

GridPtr grid(int nr = 24, int nz = 16) { return CylGrid::build(nr, nz); }

Params params(int N = 4, int K = 4) {
  Params p;
  p.N = N;
  p.K = K;
  return p;
}

template <typename Fn>
ScalarField field(const GridPtr& g, Fn fn) {
  return ScalarField::from_function(g, fn);
}

double max_diff(const ModeVelocity& a, const ModeVelocity& b) {
  double m = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) m = std::max(m, (a[c] - b[c]).max_abs());
  return m;
}

}  // namespace

TEST(Nonlinear, ZeroState) {
  auto g = grid();
  ModeState s = ModeState::zero(g, params());
  EXPECT_EQ(compute_mean_source(s).max_abs(), 0.0);
  for (int k = 1; k <= 4; ++k) {
    EXPECT_EQ(compute_triad_force(s, k).max_abs(), 0.0);
    EXPECT_EQ(compute_u0_coupling(s, k).max_abs(), 0.0);
    auto b = triad_bound_check(s, k);
    EXPECT_EQ(b.lhs, 0.0);
    EXPECT_EQ(b.rhs, 0.0);
  }
  EXPECT_EQ(flux_identity_residual(s), 0.0);
  EXPECT_THROW(compute_triad_force(s, 0), InvalidArgument);
  EXPECT_THROW(compute_triad_force(s, 5), InvalidArgument);
}

TEST(Nonlinear, CentrifugalTerm) {
  auto g = grid();
  ModeState s = ModeState::zero(g, params());
  s.modes[0].uth() = field(g, [](double r, double) { return r * (1 - r); });
  auto S = compute_mean_source(s);
  auto ex = field(g, [](double r, double) { return r * (1 - r) * (1 - r); });
  EXPECT_LT((S[UR0] - ex).max_abs(), 1e-14);
  EXPECT_EQ(S[UTH0].max_abs(), 0.0);
  EXPECT_EQ(S[UZ0].max_abs(), 0.0);
}

TEST(Nonlinear, SingleModeAzimuthalHandExpansion) {
  // u = w cos(N theta) e_theta:
  // -(u . grad) u = (w^2 / 2r)(1 + cos 2N theta) e_r + (N w^2 / 2r) sin 2N theta e_theta
  auto g = grid();
  const int N = 4;
  ModeState s = ModeState::zero(g, params(N));
  auto wfn = [](double r, double z) { return r * r * (1 - r) * std::sin(z) + 0.3 * r; };
  s.modes[1].uth() = field(g, wfn);
  auto half = field(g, [&](double r, double z) { return wfn(r, z) * wfn(r, z) / (2 * r); });
  auto S = compute_mean_source(s);
  EXPECT_LT((S[UR0] - half).max_abs(), 1e-13);
  auto F2 = compute_triad_force(s, 2);
  EXPECT_LT((F2[UR] - half).max_abs(), 1e-13);
  EXPECT_LT((F2[VTH] - double(N) * half).max_abs(), 1e-13);
  for (std::size_t c : {UZ, VR, UTH, VZ}) EXPECT_LT(F2[c].max_abs(), 1e-13) << c;
  EXPECT_EQ(compute_triad_force(s, 3).max_abs(), 0.0);
  EXPECT_EQ(compute_triad_force(s, 1).max_abs(), 0.0);
}

TEST(Nonlinear, SingleModeRadialHandExpansion) {
  // u = a cos(N theta) e_r: -(u . grad) u = -(a a_r / 2)(1 + cos 2N theta) e_r
  auto g = grid();
  ModeState s = ModeState::zero(g, params(3));
  auto afn = [](double r, double z) { return r * (1 - r * r) * std::cos(z); };
  s.modes[1].ur() = field(g, afn);
  auto ex = field(g, [&](double r, double z) { return -0.5 * afn(r, z) * (1 - 3 * r * r) * std::cos(z); });
  EXPECT_LT((compute_mean_source(s)[UR0] - ex).max_abs(), 1e-12);
  EXPECT_LT((compute_triad_force(s, 2)[UR] - ex).max_abs(), 1e-12);
}

TEST(Nonlinear, MatchesOracleProjection) {
  // modes 1 and 2 populated: every output mode against the 3-D nonlinearity
  auto g = grid(16, 8);
  Params p = params(4, 4);
  std::mt19937_64 rng(21);
  ModeState s = random_state(rng, g, p, {1, 2}, 1.0);
  FullField f = reconstruct_full(s, oracle_n_theta(p.K, p.N));
  auto S0 = compute_mean_source(s);
  auto P0 = nonlinear_term_projection(f, 0, p.N);
  const double scale = std::max(1.0, P0.max_abs());
  EXPECT_LT(max_diff(S0, P0), 1e-10 * scale);
  for (int k = 1; k <= 4; ++k) {
    auto F = compute_triad_force(s, k);
    auto P = nonlinear_term_projection(f, k, p.N);
    EXPECT_LT(max_diff(F, P), 1e-10 * scale) << k;
  }
  // F_1 has only |k1 - k2| = 1 contributions and is not zero
  EXPECT_GT(compute_triad_force(s, 1).max_abs(), 1e-3);
}

TEST(Nonlinear, U0CouplingRotationTerm) {
  auto g = grid();
  const int N = 4, k = 2;
  ModeState s = ModeState::zero(g, params(N));
  auto uth0 = field(g, [](double r, double z) { return r * (1 - r) * (1 + 0.5 * std::sin(z)); });
  auto vr = field(g, [](double r, double z) { return r * (1 - r) * std::cos(2 * z); });
  s.modes[0].uth() = uth0;
  s.modes[static_cast<std::size_t>(k)].vr() = vr;
  auto c = compute_u0_coupling(s, k);
  const ScalarField ex = -double(k * N) * over_r(uth0 * vr);
  EXPECT_LT((c[UR] - ex).max_abs(), 1e-13);
}

TEST(Nonlinear, TransportMatchesOracle) {
  // u_0 meridional plus one mode: the mode-k rhs is pure D_0 transport
  // and u_k . grad u_0 stretching, both in the 3-D nonlinearity
  auto g = grid(16, 8);
  Params p = params(4, 2);
  std::mt19937_64 rng(22);
  ModeState s = random_state(rng, g, p, {0, 1}, 1.0);
  s.modes[0].uth() = ScalarField(g);
  FullField f = reconstruct_full(s, oracle_n_theta(p.K, p.N));
  auto rhs = explicit_rhs(s);
  for (int k = 0; k <= 2; ++k) {
    auto P = nonlinear_term_projection(f, k, p.N);
    EXPECT_LT(max_diff(rhs[static_cast<std::size_t>(k)], P), 1e-10 * std::max(1.0, P.max_abs())) << k;
  }
}

TEST(Nonlinear, QuadraticHomogeneity) {
  auto g = grid();
  std::mt19937_64 rng(23);
  Params p = params(4, 4);
  ModeState s = random_state(rng, g, p, {1, 3}, 1.0);
  ModeState s3 = s;
  for (auto& m : s3.modes) m *= 3.0;
  for (int k = 1; k <= 4; ++k) {
    auto a = compute_triad_force(s, k);
    auto b = compute_triad_force(s3, k);
    a *= 9.0;
    EXPECT_LT(max_diff(a, b), 1e-12 * std::max(1.0, b.max_abs())) << k;
  }
}

TEST(Nonlinear, TruncationConsistency) {
  auto g = grid();
  std::mt19937_64 rng(24);
  Params p4 = params(4, 4), p6 = params(4, 6);
  ModeState s4 = random_state(rng, g, p4, {1, 2}, 1.0);
  ModeState s6 = ModeState::zero(g, p6);
  for (int k = 0; k <= 4; ++k) s6.modes[static_cast<std::size_t>(k)] = s4.modes[static_cast<std::size_t>(k)];
  for (int k = 1; k <= 4; ++k)
    EXPECT_EQ(max_diff(compute_triad_force(s4, k), compute_triad_force(s6, k)), 0.0) << k;
}

TEST(Nonlinear, FluxIdentity) {
  for (int nr : {32, 48}) {
    auto g = grid(nr, 16);
    Params p = params(4, 4);
    std::mt19937_64 rng(25);
    for (int t = 0; t < 5; ++t) {
      ModeState s = random_state(rng, g, p, {0, 1, 2, 3, 4}, 1.0);
      EXPECT_LE(flux_identity_residual(s), 1e-8);
    }
  }
}

TEST(Nonlinear, FluxGrowsWithDivergence) {
  auto g = grid(32, 16);
  Params p = params(4, 3);
  std::mt19937_64 rng(26);
  ModeState s = random_state(rng, g, p, {0, 1, 2, 3}, 1.0);
  auto bump = field(g, [](double r, double z) { return r * (1 - r) * std::sin(z); });
  auto with = [&](double eps) {
    ModeState t = s;
    t.modes[1].ur() += eps * bump;
    return flux_identity_residual(t);
  };
  const double r0 = with(0.0), r1 = with(1e-3), r2 = with(2e-3);
  EXPECT_GT(r1, 1e3 * std::max(r0, 1e-300));
  EXPECT_NEAR((r2 - r0) / (r1 - r0), 2.0, 0.1);
}

TEST(Nonlinear, TriadBound) {
  auto g = grid(32, 16);
  Params p = params(4, 4);
  std::mt19937_64 rng(27);
  ModeState s = random_state(rng, g, p, {1, 2}, 1.0);
  for (bool dz : {false, true}) {
    // (1, 2) -> 1 and (1, 1) -> 2 are the only triads touching populated modes
    for (int k : {1, 2}) {
      auto b = triad_bound_check(s, k, dz);
      EXPECT_GT(b.lhs, 0.0);
      EXPECT_LE(b.lhs, b.rhs) << k << ' ' << dz;
    }
  }
}
