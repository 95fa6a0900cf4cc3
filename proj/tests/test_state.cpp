#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "cylmode/checkpoint.hpp"
#include "cylmode/profiles.hpp"
#include "cylmode/state.hpp"

using namespace cylmode;

namespace {

GridPtr grid(int nr = 24, int nz = 16) { return CylGrid::build(nr, nz); }

template <typename Fn>
ScalarField field(const GridPtr& g, Fn fn) {
  return ScalarField::from_function(g, fn);
}

Params params(int N = 8, int K = 4) {
  Params p;
  p.N = N;
  p.K = K;
  return p;
}

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("cylmode_" + name)).string();
}

}  // namespace

TEST(Params, Ranges) {
  EXPECT_NO_THROW(params().validate());
  Params p = params();
  p.delta = 0.25;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = params();
  p.delta = 0.2;
  p.eta = 0.3;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = params();
  p.sigma = 1.0 / 3.0;  // m = 3: open interval (1/3, 1/2)
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = params();
  p.K = 1;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = params();
  p.N = 1;
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(Profile, ZeroInputs) {
  auto g = grid();
  ScalarField z(g);
  auto p = make_profile_divfree(z, z, z, z);
  for (const auto* f : p.fields()) EXPECT_EQ(f->max_abs(), 0.0);
}

TEST(Profile, ThetaFromRadial) {
  auto g = grid();
  ScalarField z(g);
  auto ar = field(g, [](double r, double zz) { return r * (1 - r * r) * std::sin(zz); });
  auto p = make_profile_divfree(ar, z, z, z);
  auto ex = field(g, [](double r, double zz) { return -r * (2 - 4 * r * r) * std::sin(zz); });
  EXPECT_LT((p.b_th - ex).max_abs(), 1e-12);
  EXPECT_EQ(p.a_th.max_abs(), 0.0);
}

TEST(Profile, ThetaFromVertical) {
  auto g = grid();
  ScalarField z(g);
  auto az = field(g, [](double r, double zz) { return (1 - r * r) * std::cos(zz); });
  auto p = make_profile_divfree(z, az, z, z);
  auto ex = field(g, [](double r, double zz) { return r * (1 - r * r) * std::sin(zz); });
  EXPECT_LT((p.b_th - ex).max_abs(), 1e-12);
  EXPECT_LT(profile_divergence_residual(p), 1e-10);
}

TEST(Profile, RejectsWallValue) {
  auto g = grid();
  ScalarField z(g);
  auto bad = field(g, [](double r, double) { return r; });
  EXPECT_THROW(make_profile_divfree(bad, z, z, z), DomainError);
}

TEST(Profile, BuiltinsSatisfyConstraints) {
  auto g = grid();
  for (const auto& name : builtin_profile_names()) {
    auto p = builtin_profile(name, g, 0.3);
    EXPECT_LT(profile_divergence_residual(p), 1e-10) << name;
    EXPECT_LT(profile_boundary_residual(p), 1e-12) << name;
    // every field is O(r) at the axis
    for (const auto* f : p.fields()) EXPECT_LT(f->values().row(0).abs().maxCoeff(), 0.3 * 4 * g->r()(0)) << name;
  }
  EXPECT_THROW(builtin_profile("nope", g, 1.0), InvalidArgument);
}

TEST(InitialState, Scaling) {
  auto g = grid();
  ScalarField z(g);
  auto ar = field(g, [](double r, double zz) { return r * (1 - r * r) * std::sin(zz); });
  auto prof = make_profile_divfree(ar, z, z, z);
  auto s = make_initial_state(prof, params(8));
  EXPECT_EQ(s.t, 0.0);
  const Array2D& vth = s.modes[1].vth().values();
  const Array2D& bth = prof.b_th.values();
  for (int i = 0; i < g->n_r(); ++i)
    for (int l = 0; l < g->n_z(); ++l) EXPECT_EQ(vth(i, l) * 8, bth(i, l));
  EXPECT_EQ((s.modes[1].ur() - ar).max_abs(), 0.0);
  for (int k : {0, 2, 3, 4})
    EXPECT_EQ(s.modes[static_cast<std::size_t>(k)].max_abs(), 0.0) << k;

  // doubling N leaves the meridional components alone
  auto s16 = make_initial_state(prof, params(16));
  EXPECT_EQ((s16.modes[1].ur() - s.modes[1].ur()).max_abs(), 0.0);
  EXPECT_EQ((s16.modes[1].vth() * 2.0 - s.modes[1].vth()).max_abs(), 0.0);

  Params pd = params(8);
  pd.delta = 0.2;
  pd.eta = 0.2;
  auto sd = make_initial_state(prof, pd);
  EXPECT_NEAR((sd.modes[1].ur() - std::pow(8.0, 0.2) * ar).max_abs(), 0.0, 1e-15);
}

TEST(InitialState, ZeroProfile) {
  auto g = grid();
  auto s = make_initial_state(builtin_profile("zero", g, 1.0), params());
  for (const auto& m : s.modes) EXPECT_EQ(m.max_abs(), 0.0);
  for (double d : divergence_residual(s)) EXPECT_EQ(d, 0.0);
}

TEST(InitialState, GridMismatch) {
  auto prof = builtin_profile("smooth", grid(16, 8), 1.0);
  EXPECT_THROW(make_initial_state(prof, params(), grid(24, 8)), InvalidArgument);
}

TEST(Divergence, RandomProfiles) {
  auto g = grid();
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    auto s = make_initial_state(random_profile(rng, g, 1.0), params());
    for (double d : divergence_residual(s)) worst = std::max(worst, d);
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Divergence, Perturbation) {
  // u^r_1 = r (1 - r) alone: divergence 2 - 3r, residual sqrt(15 / 11)
  auto g = grid();
  ModeState s = ModeState::zero(g, params());
  s.modes[1].ur() = field(g, [](double r, double) { return r * (1 - r); });
  EXPECT_NEAR(divergence_residual(s)[1], 1.1677484162422844, 1e-12);
  EXPECT_NEAR(std::sqrt(15.0 / 11.0), 1.1677484162422844, 1e-15);

  // on top of a divergence-free state the added divergence has norm pi
  std::mt19937_64 rng(3);
  auto s2 = make_initial_state(random_profile(rng, g, 1.0), params());
  s2.modes[1].ur() += field(g, [](double r, double) { return r * (1 - r); });
  EXPECT_NEAR(norm2(mode_divergence(s2.modes[1], 8)[0]), kPi * kPi, 1e-9);
}

TEST(Reconstruct, Basics) {
  auto g = grid();
  Params p = params(4, 3);
  ModeState s = ModeState::zero(g, p);
  auto u = reconstruct_point(s, 0.5, 1.0, 2.0);
  EXPECT_EQ(u[0], 0.0);
  EXPECT_EQ(u[1], 0.0);
  EXPECT_EQ(u[2], 0.0);

  std::mt19937_64 rng(11);
  ModeState m0 = random_state(rng, g, p, {0}, 1.0);
  auto a = reconstruct_point(m0, 0.4, 0.2, 1.0);
  auto b = reconstruct_point(m0, 0.4, 2.9, 1.0);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(a[c], b[c]);

  ModeState m1 = random_state(rng, g, p, {1}, 1.0);
  a = reconstruct_point(m1, 0.6, 0.0, 3.0);
  b = reconstruct_point(m1, 0.6, 2 * kPi / 4, 3.0);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(a[c], b[c], 1e-14);

  EXPECT_THROW(reconstruct_point(s, 0.0, 0.0, 0.0), DomainError);
  EXPECT_THROW(reconstruct_point(s, 0.5, 0.0, 7.0), DomainError);
}

TEST(Reconstruct, Linear) {
  auto g = grid();
  Params p = params(4, 3);
  std::mt19937_64 rng(5);
  ModeState s1 = random_state(rng, g, p, {0, 1, 3}, 1.0);
  ModeState s2 = random_state(rng, g, p, {1, 2}, 1.0);
  ModeState c = ModeState::zero(g, p);
  for (int k = 0; k <= 3; ++k) {
    auto& m = c.modes[static_cast<std::size_t>(k)];
    m += s1.modes[static_cast<std::size_t>(k)];
    m *= 2.0;
    ModeVelocity t = s2.modes[static_cast<std::size_t>(k)];
    t *= -0.5;
    m += t;
  }
  for (double th : {0.0, 0.7, 2.2}) {
    auto u1 = reconstruct_point(s1, 0.3, th, 1.3);
    auto u2 = reconstruct_point(s2, 0.3, th, 1.3);
    auto uc = reconstruct_point(c, 0.3, th, 1.3);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(uc[k], 2 * u1[k] - 0.5 * u2[k], 1e-12);
  }
}

TEST(Checkpoint, BitExactRoundTrip) {
  auto g = grid(12, 8);
  Params p = params(4, 3);
  p.nu = 0.0;
  p.delta = 0.1;
  p.eta = 0.3;
  std::mt19937_64 rng(9);
  ModeState s = random_state(rng, g, p, {0, 1, 2, 3}, 1.0);
  s.t = 0.123456789;
  const auto path = tmp_path("rt.ckpt");
  save_checkpoint(path, s);
  // header: 8 + 4 * 4 + 5 * 8 bytes, then (3 + 3 * 6) fields
  EXPECT_EQ(std::filesystem::file_size(path), 8u + 16u + 40u + 21u * 12u * 8u * 8u);
  ModeState r = load_checkpoint(path, p);
  EXPECT_EQ(r.t, s.t);
  EXPECT_EQ(r.params.nu, 0.0);
  EXPECT_EQ(r.params.delta, 0.1);
  EXPECT_EQ(r.params.eta, 0.3);
  EXPECT_EQ(r.params.N, 4);
  EXPECT_EQ(r.K(), 3);
  EXPECT_EQ(r.grid->L_z(), g->L_z());
  for (std::size_t k = 0; k < s.modes.size(); ++k)
    for (std::size_t c = 0; c < s.modes[k].size(); ++c)
      EXPECT_TRUE((r.modes[k][c].values() == s.modes[k][c].values()).all());
  // saving again gives identical bytes
  const auto path2 = tmp_path("rt2.ckpt");
  save_checkpoint(path2, r);
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
  EXPECT_EQ(sa.substr(0, 8), "CYLMODE1");
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST(Checkpoint, Corrupt) {
  const auto path = tmp_path("bad.ckpt");
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOTMAGIC and some bytes";
  }
  EXPECT_THROW(load_checkpoint(path), IoError);
  auto g = grid(8, 8);
  save_checkpoint(path, ModeState::zero(g, params(4, 2)));
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  EXPECT_THROW(load_checkpoint(path), IoError);
  std::remove(path.c_str());
  EXPECT_THROW(load_checkpoint(tmp_path("missing.ckpt")), IoError);
}
