#pragma once

// Per-mode anisotropic Stokes operator. Each family (r, theta, z) of a mode
// is discretized as a Galerkin problem on the radial nodes with the
// quadrature weights as mass matrix, diagonalized in z by the FFT:
//
//   [ alpha W + gamma A    B^H ] [u]   [W g]
//   [ B                    0   ] [p] = [ 0 ]
//
// A is the quadrature form of -(d_r^2 + d_r/r + nu^2 d_z^2 - (1+kappa^2)/r^2)
// on the r and theta components (coupled by s*2*kappa/r^2) and of
// -(d_r^2 + d_r/r + nu^2 d_z^2 - kappa^2/r^2) on z; B is the mode divergence
// d_r a + a/r + s kappa b/r + d_z c collocated at every radial node. With
// this choice the velocity is nodally divergence-free and the discrete
// energy identity holds exactly. The wall node carries u = 0.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <utility>
#include <vector>

#include "cylmode/errors.hpp"
#include "cylmode/grid.hpp"
#include "cylmode/parallel.hpp"
#include "cylmode/state.hpp"

namespace cylmode {

using cd = std::complex<double>;
using CMatrix = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic>;
using CVector = Eigen::Matrix<cd, Eigen::Dynamic, 1>;

// One family of one mode. sign = +1 for (u^r, v^theta, u^z) and for mode 0,
// -1 for (v^r, u^theta, v^z).
struct FamilySpec {
  double kappa = 0.0;
  int sign = 1;
  double nu = 1.0;
  double alpha = 1.0;  // mass coefficient (1/dt)
  double gamma = 1.0;  // stiffness coefficient (0 gives the L2 projection)

  auto key(int q) const { return std::make_tuple(kappa, sign, nu, alpha, gamma, q); }
};

using Triple = std::array<ScalarField, 3>;

struct FamilySolution {
  Triple u;
  ScalarField p;  // pressure (P_k or Q_k); mode 0 gauge: zero weighted mean
};

class StokesSolver {
 public:
  explicit StokesSolver(GridPtr grid) : grid_(std::move(grid)) {
    const CylGrid& g = *grid_;
    const int n = g.n_r();
    const int m = n - 1;
    const Eigen::MatrixXd d_int = g.diff_r().leftCols(m);
    stiff_ = d_int.transpose() * g.radial_weights().asDiagonal() * d_int;
    w_int_ = g.radial_weights().head(m);
    inv_r2_ = g.inv_r().head(m).array().square().matrix();
    // Divergence pieces, n x m.
    div_r_ = d_int;
    for (int i = 0; i < m; ++i) div_r_(i, i) += g.inv_r()(i);
    inv_r_e_ = Eigen::MatrixXd::Zero(n, m);
    for (int i = 0; i < m; ++i) inv_r_e_(i, i) = g.inv_r()(i);
  }

  const GridPtr& grid() const { return grid_; }

  // Solves alpha W u + gamma A u + B^H p = W g, B u = 0 for the nodal forcing g.
  FamilySolution solve(const std::array<const ScalarField*, 3>& rhs, const FamilySpec& spec) const {
    const CylGrid& g = *grid_;
    const int n = g.n_r();
    const int m = n - 1;
    const int nq = g.n_zmodes();
    std::array<CArray2D, 3> hat;
    for (int c = 0; c < 3; ++c) hat[static_cast<std::size_t>(c)] = g.fft_z(rhs[static_cast<std::size_t>(c)]->values());
    std::array<CArray2D, 3> out_u;
    for (auto& a : out_u) a = CArray2D::Zero(n, nq);
    CArray2D out_p = CArray2D::Zero(n, nq);
    CVector b(3 * m + n);
    for (int q = 0; q < nq; ++q) {
      const Factor& f = factor(q, spec);
      b.setZero();
      for (int c = 0; c < 3; ++c)
        for (int i = 0; i < m; ++i) b(c * m + i) = w_int_(i) * hat[static_cast<std::size_t>(c)](i, q);
      CVector x = f.solve(b);
      for (int c = 0; c < 3; ++c)
        for (int i = 0; i < m; ++i) out_u[static_cast<std::size_t>(c)](i, q) = x(c * m + i);
      for (int i = 0; i < n; ++i) out_p(i, q) = -x(3 * m + i);
    }
    FamilySolution s;
    for (int c = 0; c < 3; ++c)
      s.u[static_cast<std::size_t>(c)] = ScalarField(grid_, g.ifft_z(out_u[static_cast<std::size_t>(c)]));
    s.p = ScalarField(grid_, g.ifft_z(out_p));
    return s;
  }

  // W^{-1} A u at the interior nodes (zero at the wall): the nodal form of
  // the operator -(Laplacian-type) acting on a family.
  Triple apply(const std::array<const ScalarField*, 3>& u, const FamilySpec& spec) const {
    const CylGrid& g = *grid_;
    const int n = g.n_r();
    const int m = n - 1;
    const int nq = g.n_zmodes();
    std::array<CArray2D, 3> hat;
    for (int c = 0; c < 3; ++c) hat[static_cast<std::size_t>(c)] = g.fft_z(u[static_cast<std::size_t>(c)]->values());
    std::array<CArray2D, 3> out;
    for (auto& a : out) a = CArray2D::Zero(n, nq);
    for (int q = 0; q < nq; ++q) {
      const CMatrix h = hblock(q, FamilySpec{spec.kappa, spec.sign, spec.nu, 0.0, 1.0});
      CVector x(3 * m);
      for (int c = 0; c < 3; ++c)
        for (int i = 0; i < m; ++i) x(c * m + i) = hat[static_cast<std::size_t>(c)](i, q);
      const CVector y = h * x;
      for (int c = 0; c < 3; ++c)
        for (int i = 0; i < m; ++i) out[static_cast<std::size_t>(c)](i, q) = y(c * m + i) / w_int_(i);
    }
    Triple r;
    for (int c = 0; c < 3; ++c) r[static_cast<std::size_t>(c)] = ScalarField(grid_, g.ifft_z(out[static_cast<std::size_t>(c)]));
    return r;
  }

  std::size_t cached_factorizations() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.size();
  }

 private:
  struct Factor {
    Eigen::PartialPivLU<CMatrix> lu;
    bool bordered = false;

    CVector solve(const CVector& b) const {
      if (!bordered) return lu.solve(b);
      CVector bb = CVector::Zero(b.size() + 1);
      bb.head(b.size()) = b;
      return lu.solve(bb).head(b.size());
    }
  };

  CMatrix hblock(int q, const FamilySpec& s) const {
    const int m = static_cast<int>(w_int_.size());
    const double beta = grid_->beta(q);
    const Eigen::MatrixXd W = w_int_.asDiagonal();
    const Eigen::MatrixXd Wr2 = (w_int_.array() * inv_r2_.array()).matrix().asDiagonal();
    const Eigen::MatrixXd base = stiff_ + (s.nu * s.nu * beta * beta) * W;
    CMatrix h = CMatrix::Zero(3 * m, 3 * m);
    const double k2 = s.kappa * s.kappa;
    h.block(0, 0, m, m) = (s.alpha * W + s.gamma * (base + (1.0 + k2) * Wr2)).cast<cd>();
    h.block(m, m, m, m) = (s.alpha * W + s.gamma * (base + (1.0 + k2) * Wr2)).cast<cd>();
    h.block(2 * m, 2 * m, m, m) = (s.alpha * W + s.gamma * (base + k2 * Wr2)).cast<cd>();
    const Eigen::MatrixXd cross = (s.gamma * s.sign * 2.0 * s.kappa) * Wr2;
    h.block(0, m, m, m) = cross.cast<cd>();
    h.block(m, 0, m, m) = cross.cast<cd>();
    return h;
  }

  CMatrix bblock(int q, const FamilySpec& s) const {
    const CylGrid& g = *grid_;
    const int n = g.n_r();
    const int m = n - 1;
    const double beta = g.beta(q);
    const Eigen::MatrixXd Wn = g.radial_weights().asDiagonal();
    CMatrix b = CMatrix::Zero(n, 3 * m);
    b.block(0, 0, n, m) = (Wn * div_r_).cast<cd>();
    b.block(0, m, n, m) = (s.sign * s.kappa * (Wn * inv_r_e_)).cast<cd>();
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, m);
    e.topRows(m).setIdentity();
    b.block(0, 2 * m, n, m) = cd(0.0, beta) * (Wn * e).cast<cd>();
    return b;
  }

  const Factor& factor(int q, const FamilySpec& spec) const {
    const auto key = spec.key(q);
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return *it->second;
    }
    const int n = grid_->n_r();
    const int m = n - 1;
    CMatrix kkt = CMatrix::Zero(3 * m + n, 3 * m + n);
    const CMatrix h = hblock(q, spec);
    const CMatrix b = bblock(q, spec);
    kkt.topLeftCorner(3 * m, 3 * m) = h;
    kkt.topRightCorner(3 * m, n) = b.adjoint();
    kkt.bottomLeftCorner(n, 3 * m) = b;
    auto f = std::make_shared<Factor>();
    // Axisymmetric z-mean block: the pressure is fixed up to a constant.
    // Border with the weighted-mean constraint; the multiplier is zero.
    if (spec.kappa == 0.0 && grid_->beta(q) == 0.0) {
      f->bordered = true;
      const auto size = kkt.rows();
      CMatrix ext = CMatrix::Zero(size + 1, size + 1);
      ext.topLeftCorner(size, size) = kkt;
      for (int i = 0; i < n; ++i) {
        const double w = grid_->radial_weights()(i);
        ext(3 * m + i, size) = w;
        ext(size, 3 * m + i) = w;
      }
      kkt = std::move(ext);
    }
    f->lu.compute(kkt);
    const double rc = f->lu.rcond();
    if (!(rc > 1e-15))
      throw SingularOperator("stokes: KKT block singular (rcond " + std::to_string(rc) +
                             ", kappa " + std::to_string(spec.kappa) + ", q " +
                             std::to_string(q) + ")");
    std::lock_guard<std::mutex> lock(mu_);
    auto [it, inserted] = cache_.emplace(key, std::move(f));
    return *it->second;
  }

  GridPtr grid_;
  Eigen::MatrixXd stiff_, div_r_, inv_r_e_;
  Eigen::VectorXd w_int_, inv_r2_;
  mutable std::mutex mu_;
  mutable std::map<std::tuple<double, int, double, double, double, int>, std::shared_ptr<Factor>>
      cache_;
};

// ---------------------------------------------------------------------------
// Mode-level helpers.

inline int family_count(int k) { return k == 0 ? 1 : 2; }

inline FamilySpec family_spec(int k, int fam, double k_eff, double nu, double alpha,
                              double gamma) {
  FamilySpec s;
  s.kappa = k == 0 ? 0.0 : k_eff;
  s.sign = fam == 0 ? 1 : -1;
  s.nu = nu;
  s.alpha = alpha;
  s.gamma = gamma;
  return s;
}

inline std::array<const ScalarField*, 3> family_ptrs(const ModeVelocity& u, int fam) {
  const std::size_t o = static_cast<std::size_t>(3 * fam);
  return {&u[o], &u[o + 1], &u[o + 2]};
}

// Velocities below this fraction of |g| / alpha are flushed to zero.
inline constexpr double kRoundoffFlush = 1e-13;

// Solves alpha u + gamma A u + grad P = g (nodal g) with the mode constraint.
inline std::pair<ModeVelocity, ModePressure> solve_mode(const StokesSolver& solver,
                                                        const ModeVelocity& g, double k_eff,
                                                        double nu, double alpha, double gamma) {
  const int k = g.k();
  ModeVelocity u(k, solver.grid());
  ModePressure p;
  for (int fam = 0; fam < family_count(k); ++fam) {
    FamilySolution s = solver.solve(family_ptrs(g, fam), family_spec(k, fam, k_eff, nu, alpha, gamma));
    for (int c = 0; c < 3; ++c) u[static_cast<std::size_t>(3 * fam + c)] = std::move(s.u[static_cast<std::size_t>(c)]);
    p.c.push_back(std::move(s.p));
  }
  // A velocity at round-off level of the data (forcing that is a pure gradient)
  // carries no information and is not divergence-free in relative terms.
  if (alpha > 0.0 && mode_norm2(u) <= kRoundoffFlush * kRoundoffFlush * mode_norm2(g) / (alpha * alpha))
    u = ModeVelocity(k, solver.grid());
  return {std::move(u), std::move(p)};
}

// Nodal operator W^{-1} A u of a whole mode.
inline ModeVelocity apply_stokes_operator(const StokesSolver& solver, const ModeVelocity& u,
                                          double k_eff, double nu) {
  const int k = u.k();
  ModeVelocity out(k, solver.grid());
  for (int fam = 0; fam < family_count(k); ++fam) {
    Triple t = solver.apply(family_ptrs(u, fam), family_spec(k, fam, k_eff, nu, 0.0, 1.0));
    for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(3 * fam + c)] = std::move(t[static_cast<std::size_t>(c)]);
  }
  return out;
}

// L2 projection onto the discretely divergence-free fields of the mode.
inline ModeVelocity project_divfree(const StokesSolver& solver, const ModeVelocity& u, double k_eff) {
  return solve_mode(solver, u, k_eff, 0.0, 1.0, 0.0).first;
}

// Parts of the quadratic form a(u, u) of one mode, Omega-norm convention.
struct DissipationParts {
  double grad_r = 0.0;    // ||d_r u||^2
  double grad_z = 0.0;    // nu^2 ||d_z u||^2
  double over_r = 0.0;    // kappa^2 ||u/r||^2 + ||(r, theta components)/r||^2
  double cross = 0.0;     // sum over families of 4 s kappa (a/r | b/r)
  double total() const { return grad_r + grad_z + over_r + cross; }
};

inline DissipationParts dissipation_parts(const ModeVelocity& u, double k_eff, double nu) {
  DissipationParts d;
  const int k = u.k();
  const double kappa = k == 0 ? 0.0 : k_eff;
  for (int fam = 0; fam < family_count(k); ++fam) {
    const auto f = family_ptrs(u, fam);
    const double s = fam == 0 ? 1.0 : -1.0;
    for (int c = 0; c < 3; ++c) {
      d.grad_r += norm2(d_r(*f[static_cast<std::size_t>(c)]));
      d.grad_z += nu * nu * norm2(d_z(*f[static_cast<std::size_t>(c)]));
      const double w = norm2(over_r(*f[static_cast<std::size_t>(c)]));
      d.over_r += (c < 2 ? 1.0 + kappa * kappa : kappa * kappa) * w;
    }
    d.cross += 4.0 * s * kappa * kThetaMeasure * inner(over_r(*f[0]), over_r(*f[1]));
  }
  return d;
}

// (f | u) in the Omega-norm convention, summed over components.
inline double mode_inner(const ModeVelocity& f, const ModeVelocity& u) {
  double s = 0.0;
  for (std::size_t c = 0; c < u.size(); ++c) s += kThetaMeasure * inner(f[c], u[c]);
  return s;
}

// Whether Appendix A tests use the plain index k or the scaled kN.
enum class WavenumberConvention { plain, scaled };

inline double effective_wavenumber(int k, int N, WavenumberConvention c) {
  return c == WavenumberConvention::plain ? static_cast<double>(k) : mode_wavenumber(k, N);
}

// One backward-Euler step of the mode-k Stokes system with forcing f (taken
// at the new time level).
inline std::pair<ModeVelocity, ModePressure> stokes_step(const StokesSolver& solver,
                                                         const ModeVelocity& w,
                                                         const ModeVelocity& f, double k_eff,
                                                         double nu, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("stokes_step: dt must be > 0");
  ModeVelocity g = (1.0 / dt) * w;
  g += f;
  return solve_mode(solver, g, k_eff, nu, 1.0 / dt, 1.0);
}

inline std::pair<ModeVelocity, ModePressure> stokes_step(
    const StokesSolver& solver, const ModeVelocity& w, const ModeVelocity& f, const Params& params,
    double dt, WavenumberConvention conv = WavenumberConvention::plain) {
  return stokes_step(solver, w, f, effective_wavenumber(w.k(), params.N, conv), params.nu, dt);
}

// Running Appendix A quantities of one mode.
struct StokesModeRecord {
  double energy = 0.0;        // ||w_k(t)||^2
  double sup_energy = 0.0;    // sup over snapshots
  double int_grad_r = 0.0;    // int ||d_r w||^2
  double int_grad_z = 0.0;    // int nu^2 ||d_z w||^2
  double int_weighted = 0.0;  // int of ||(w^r, w^theta)/r||^2 (k = 0) or (k-1)^2 ||w/r||^2
  double int_form = 0.0;      // int a(w, w), the full discrete dissipation
  double int_forcing = 0.0;   // int (f | w)
};

struct StokesSnapshot {
  double t = 0.0;
  std::vector<StokesModeRecord> modes;
};

struct StokesTrajectory {
  std::vector<StokesSnapshot> snapshots;
  std::vector<ModeState> states;  // at the snapshot cadence
  ModeState final_state;
  WavenumberConvention convention = WavenumberConvention::plain;
};

using ForcingFn = std::function<std::vector<ModeVelocity>(double)>;

inline double weighted_over_r(const ModeVelocity& u, double k_eff) {
  if (u.k() == 0) return norm2(over_r(u.ur())) + norm2(over_r(u.uth()));
  double s = 0.0;
  for (const auto& f : u.comps()) s += norm2(over_r(f));
  return (k_eff - 1.0) * (k_eff - 1.0) * s;
}

// Backward Euler over [0, T] for every retained mode; integrals use the
// right-endpoint rule, which makes the discrete energy inequality exact.
inline StokesTrajectory stokes_evolve(const StokesSolver& solver, const ModeState& w_in,
                                      const ForcingFn& forcing, double T, double dt,
                                      WavenumberConvention conv = WavenumberConvention::plain,
                                      int keep_every = 0) {
  if (!(dt > 0.0) || !(T >= 0.0)) throw InvalidArgument("stokes_evolve: need dt > 0, T >= 0");
  StokesTrajectory tr;
  tr.convention = conv;
  ModeState s = w_in;
  const int K = s.K();
  const double nu = s.params.nu;
  auto keff = [&](int k) { return effective_wavenumber(k, s.params.N, conv); };
  StokesSnapshot snap;
  snap.t = s.t;
  snap.modes.resize(static_cast<std::size_t>(K + 1));
  for (int k = 0; k <= K; ++k) {
    auto& r = snap.modes[static_cast<std::size_t>(k)];
    r.energy = r.sup_energy = mode_norm2(s.modes[static_cast<std::size_t>(k)]);
  }
  tr.snapshots.push_back(snap);
  if (keep_every > 0) tr.states.push_back(s);
  const long steps = std::lround(T / dt);
  for (long n = 1; n <= steps; ++n) {
    const double t1 = w_in.t + static_cast<double>(n) * dt;
    std::vector<ModeVelocity> f;
    if (forcing) f = forcing(t1);
    StokesSnapshot next = tr.snapshots.back();
    next.t = t1;
    parallel_for(static_cast<std::size_t>(K + 1), [&](std::size_t k) {
      const ModeVelocity zero(static_cast<int>(k), s.grid);
      const ModeVelocity& fk = f.empty() ? zero : f[k];
      auto [u, p] = stokes_step(solver, s.modes[k], fk, keff(static_cast<int>(k)), nu, dt);
      const DissipationParts d = dissipation_parts(u, keff(static_cast<int>(k)), nu);
      auto& r = next.modes[k];
      r.energy = mode_norm2(u);
      r.sup_energy = std::max(r.sup_energy, r.energy);
      r.int_grad_r += dt * d.grad_r;
      r.int_grad_z += dt * d.grad_z;
      r.int_weighted += dt * weighted_over_r(u, keff(static_cast<int>(k)));
      r.int_form += dt * d.total();
      r.int_forcing += dt * mode_inner(fk, u);
      s.modes[k] = std::move(u);
      s.pressures[k] = std::move(p);
    });
    s.t = t1;
    tr.snapshots.push_back(std::move(next));
    if (keep_every > 0 && n % keep_every == 0) tr.states.push_back(s);
  }
  tr.final_state = std::move(s);
  return tr;
}

// Largest ||w_k|| / ||w_k0|| over snapshots and k != k0.
struct LeakageReport {
  int k0 = 0;
  double leakage = 0.0;
  double horizon = 0.0;
  int steps = 0;
};

inline LeakageReport leakage_of(const StokesTrajectory& tr, int k0) {
  LeakageReport rep;
  rep.k0 = k0;
  for (const auto& sn : tr.snapshots) {
    const double base = std::sqrt(sn.modes[static_cast<std::size_t>(k0)].energy);
    for (std::size_t k = 0; k < sn.modes.size(); ++k) {
      if (static_cast<int>(k) == k0) continue;
      const double e = std::sqrt(sn.modes[k].energy);
      if (e == 0.0) continue;
      rep.leakage = std::max(rep.leakage, base > 0.0 ? e / base : kInf);
    }
  }
  rep.steps = static_cast<int>(tr.snapshots.size()) - 1;
  rep.horizon = tr.snapshots.back().t - tr.snapshots.front().t;
  return rep;
}

// Evolves data and steady forcing supported on mode k0 only.
inline LeakageReport mode_invariance_check(const StokesSolver& solver, const ModeVelocity& data,
                                           const ModeVelocity& force, const Params& params,
                                           double T, double dt,
                                           WavenumberConvention conv = WavenumberConvention::plain) {
  const int k0 = data.k();
  if (k0 < 0 || k0 > params.K) throw InvalidArgument("mode_invariance_check: k0 outside 0..K");
  ModeState s = ModeState::zero(solver.grid(), params);
  s.modes[static_cast<std::size_t>(k0)] = data;
  ForcingFn f = [&](double) {
    std::vector<ModeVelocity> v;
    for (int k = 0; k <= params.K; ++k) v.emplace_back(k, solver.grid());
    v[static_cast<std::size_t>(k0)] = force;
    return v;
  };
  return leakage_of(stokes_evolve(solver, s, f, T, dt, conv), k0);
}

// ---------------------------------------------------------------------------
// Linear flow u_L: the single-mode Stokes flow with horizontal dissipation.

struct LinearFlowRow {
  int j = 0;
  double sup_norm2 = 0.0;      // sup_t ||d_z^j u_L||^2
  double int_grad_r = 0.0;     // int ||d_r d_z^j u_L||^2
  double int_weighted = 0.0;   // N^2 int ||d_z^j u_L / r||^2
  double profile_norm2 = 0.0;  // N^{2 delta} ||d_z^j alpha||^2
  double ratio = 0.0;          // (sum of the three) / profile_norm2
};

struct LinearFlowReport {
  int N = 0;
  double T = 0.0;
  double dt = 0.0;
  std::vector<LinearFlowRow> rows;
  // Discrete energy identity per step, largest relative residual: exact
  // (with the backward-Euler increment term) and without it.
  double identity_residual = 0.0;
  double identity_residual_naive = 0.0;
  ModeVelocity final_mode;
};

namespace detail {
inline ModeVelocity dz_mode(const ModeVelocity& u, int j) {
  ModeVelocity o = u;
  for (auto& f : o.comps()) f = d_z(f, j);
  return o;
}
}  // namespace detail

inline LinearFlowReport linear_flow_uL(const StokesSolver& solver, const InitProfile& profile,
                                       const Params& params, double T, double dt, int j_max = -1) {
  if (params.N < 3) throw InvalidArgument("linear_flow_uL: N must be >= 3");
  if (!(dt > 0.0) || !(T >= 0.0)) throw InvalidArgument("linear_flow_uL: need dt > 0, T >= 0");
  if (j_max < 0) j_max = params.m;
  const ModeState s0 = make_initial_state(profile, params, solver.grid());
  ModeVelocity u = s0.modes[1];
  const double kn = params.N;
  const double nu = 0.0;
  LinearFlowReport rep;
  rep.N = params.N;
  rep.T = T;
  rep.dt = dt;
  const double amp2 = std::pow(static_cast<double>(params.N), 2.0 * params.delta);
  for (int j = 0; j <= j_max; ++j) {
    LinearFlowRow row;
    row.j = j;
    double a2 = 0.0;
    for (const auto* f : profile.fields()) a2 += norm2(d_z(*f, j));
    row.profile_norm2 = amp2 * a2;
    row.sup_norm2 = mode_norm2(detail::dz_mode(u, j));
    rep.rows.push_back(row);
  }
  const ModeVelocity zero(1, solver.grid());
  const long steps = std::lround(T / dt);
  for (long n = 1; n <= steps; ++n) {
    ModeVelocity next = stokes_step(solver, u, zero, kn, nu, dt).first;
    // 1/2 d/dt ||u||^2 + ||d_r u||^2 + N^2 ||u/r||^2 + ||(u^r,u^th,v^th,v^r)/r||^2
    //   = 4N (v^r/r | u^th/r) - 4N (u^r/r | v^th/r)
    const double e0 = mode_norm2(u);
    const double e1 = mode_norm2(next);
    ModeVelocity diff = next - u;
    const double inc = mode_norm2(diff);
    const DissipationParts d = dissipation_parts(next, kn, nu);
    const double rhs = -d.cross;
    const double lhs_naive = (e1 - e0) / (2.0 * dt) + d.grad_r + d.grad_z + d.over_r;
    const double lhs = lhs_naive + inc / (2.0 * dt);
    const double scale = std::max(std::abs(d.grad_r) + std::abs(d.over_r) + std::abs(rhs), 1e-300);
    rep.identity_residual = std::max(rep.identity_residual, std::abs(lhs - rhs) / scale);
    rep.identity_residual_naive = std::max(rep.identity_residual_naive, std::abs(lhs_naive - rhs) / scale);
    for (auto& row : rep.rows) {
      const ModeVelocity dzu = detail::dz_mode(next, row.j);
      row.sup_norm2 = std::max(row.sup_norm2, mode_norm2(dzu));
      double gr = 0.0, wr = 0.0;
      for (const auto& f : dzu.comps()) {
        gr += norm2(d_r(f));
        wr += norm2(over_r(f));
      }
      row.int_grad_r += dt * gr;
      row.int_weighted += dt * kn * kn * wr;
    }
    u = std::move(next);
  }
  for (auto& row : rep.rows)
    row.ratio = row.profile_norm2 > 0.0
                    ? (row.sup_norm2 + row.int_grad_r + row.int_weighted) / row.profile_norm2
                    : 0.0;
  rep.final_mode = std::move(u);
  return rep;
}

}  // namespace cylmode
