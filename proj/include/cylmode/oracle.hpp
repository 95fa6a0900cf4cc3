#pragma once

// Brute-force reference solver on an (r, theta, z) grid. Shares the grid
// module (radial scheme, z transforms) with the mode solver but not its
// physics: the nonlinearity is formed pointwise in physical space with a
// theta FFT, and the linear solve works in complex exponentials e^{i m theta}.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <array>
#include <cmath>
#include <complex>
#include <memory>
#include <vector>

#include "cylmode/errors.hpp"
#include "cylmode/grid.hpp"
#include "cylmode/state.hpp"

namespace cylmode {

struct FullField {
  GridPtr grid;
  int n_theta = 0;
  double t = 0.0;
  // u[c][j]: component c (r, theta, z) on the theta plane j.
  std::array<std::vector<Array2D>, 3> u;
  std::vector<Array2D> P;

  static FullField zero(const GridPtr& g, int n_theta) {
    if (n_theta < 4 || n_theta % 2 != 0) throw InvalidArgument("FullField: n_theta must be even and >= 4");
    if (n_theta > 128) throw InvalidArgument("FullField: n_theta is capped at 128");
    FullField f;
    f.grid = g;
    f.n_theta = n_theta;
    for (auto& c : f.u) c.assign(static_cast<std::size_t>(n_theta), Array2D::Zero(g->n_r(), g->n_z()));
    f.P.assign(static_cast<std::size_t>(n_theta), Array2D::Zero(g->n_r(), g->n_z()));
    return f;
  }

  double theta(int j) const { return 2.0 * kPi * j / n_theta; }
};

// Smallest even theta resolution free of aliasing for products of modes up to K N.
inline int oracle_n_theta(int K, int N) { return 4 * K * N; }

inline FullField reconstruct_full(const ModeState& s, int n_theta) {
  FullField f = FullField::zero(s.grid, n_theta);
  for (int j = 0; j < n_theta; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    const ModeVelocity& m0 = s.modes[0];
    f.u[0][jj] = m0.ur().values();
    f.u[1][jj] = m0.uth().values();
    f.u[2][jj] = m0.uz().values();
    f.P[jj] = s.pressures[0].c[0].values();
    for (int k = 1; k <= s.K(); ++k) {
      const ModeVelocity& m = s.modes[static_cast<std::size_t>(k)];
      const double a = mode_wavenumber(k, s.params.N) * f.theta(j);
      const double c = std::cos(a), sn = std::sin(a);
      f.u[0][jj] += c * m.ur().values() + sn * m.vr().values();
      f.u[1][jj] += c * m.uth().values() + sn * m.vth().values();
      f.u[2][jj] += c * m.uz().values() + sn * m.vz().values();
      const ModePressure& p = s.pressures[static_cast<std::size_t>(k)];
      f.P[jj] += c * p.c[0].values() + sn * p.c[1].values();
    }
  }
  f.t = s.t;
  return f;
}

namespace detail {

// (cos, sin) coefficients of wavenumber m of the theta samples of a field.
inline std::pair<Array2D, Array2D> theta_coeffs(const std::vector<Array2D>& planes, int m) {
  const int nt = static_cast<int>(planes.size());
  Array2D c = Array2D::Zero(planes[0].rows(), planes[0].cols());
  Array2D s = c;
  const double scale = m == 0 ? 1.0 / nt : 2.0 / nt;
  for (int j = 0; j < nt; ++j) {
    const double a = 2.0 * kPi * m * j / nt;
    c += (scale * std::cos(a)) * planes[static_cast<std::size_t>(j)];
    s += (scale * std::sin(a)) * planes[static_cast<std::size_t>(j)];
  }
  return {c, s};
}

}  // namespace detail

// Extracts the cos(kN theta) / sin(kN theta) coefficients for k = 0..K.
inline ModeState project_to_modes(const FullField& f, const Params& params) {
  if (2 * params.K * params.N >= f.n_theta)
    throw InvalidArgument("project_to_modes: n_theta does not resolve K N");
  ModeState s = ModeState::zero(f.grid, params);
  s.t = f.t;
  for (int k = 0; k <= params.K; ++k) {
    const int m = k * params.N;
    ModeVelocity& u = s.modes[static_cast<std::size_t>(k)];
    auto [cr, sr] = detail::theta_coeffs(f.u[0], m);
    auto [ct, st] = detail::theta_coeffs(f.u[1], m);
    auto [cz, sz] = detail::theta_coeffs(f.u[2], m);
    auto [cp, sp] = detail::theta_coeffs(f.P, m);
    u.ur() = ScalarField(f.grid, cr);
    u.uz() = ScalarField(f.grid, cz);
    u.uth() = ScalarField(f.grid, ct);
    s.pressures[static_cast<std::size_t>(k)].c[0] = ScalarField(f.grid, cp);
    if (k > 0) {
      u.vr() = ScalarField(f.grid, sr);
      u.vth() = ScalarField(f.grid, st);
      u.vz() = ScalarField(f.grid, sz);
      s.pressures[static_cast<std::size_t>(k)].c[1] = ScalarField(f.grid, sp);
    }
  }
  return s;
}

// Omega-norm^2 of the full field, theta by the trapezoid rule (exact for
// resolved trig polynomials).
inline double full_norm2(const FullField& f) {
  double s = 0.0;
  for (const auto& c : f.u)
    for (const auto& p : c) s += (f.grid->quad_w() * p.square()).sum();
  return s * 2.0 * kPi / f.n_theta;
}

namespace detail {

using cdouble = std::complex<double>;
using CVec = Eigen::Matrix<cdouble, Eigen::Dynamic, 1>;
using CMat = Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic>;

// d/dtheta by FFT of every (r, z) line.
inline std::vector<Array2D> d_theta(const std::vector<Array2D>& planes) {
  const int nt = static_cast<int>(planes.size());
  const Eigen::Index nr = planes[0].rows(), nz = planes[0].cols();
  std::vector<Array2D> out(planes.size(), Array2D::Zero(nr, nz));
  Eigen::FFT<double> fft;
  std::vector<double> line(static_cast<std::size_t>(nt));
  std::vector<cdouble> spec;
  for (Eigen::Index i = 0; i < nr; ++i)
    for (Eigen::Index l = 0; l < nz; ++l) {
      for (int j = 0; j < nt; ++j) line[static_cast<std::size_t>(j)] = planes[static_cast<std::size_t>(j)](i, l);
      fft.fwd(spec, line);
      for (int m = 0; m < nt; ++m) {
        int mm = m <= nt / 2 ? m : m - nt;
        if (m == nt / 2) mm = 0;
        spec[static_cast<std::size_t>(m)] *= cdouble(0.0, mm);
      }
      std::vector<double> back;
      fft.inv(back, spec);
      for (int j = 0; j < nt; ++j) out[static_cast<std::size_t>(j)](i, l) = back[static_cast<std::size_t>(j)];
    }
  return out;
}

}  // namespace detail

// -(u . grad) u with the curvature terms, in cylindrical components.
inline std::array<std::vector<Array2D>, 3> oracle_nonlinear(const FullField& f) {
  const CylGrid& g = *f.grid;
  const auto nt = static_cast<std::size_t>(f.n_theta);
  std::array<std::vector<Array2D>, 3> dth;
  for (int c = 0; c < 3; ++c) dth[static_cast<std::size_t>(c)] = detail::d_theta(f.u[static_cast<std::size_t>(c)]);
  std::array<std::vector<Array2D>, 3> out;
  for (auto& o : out) o.resize(nt);
  const Eigen::ArrayXd ir = g.inv_r().array();
  for (std::size_t j = 0; j < nt; ++j) {
    const Array2D& ur = f.u[0][j];
    const Array2D& ut = f.u[1][j];
    const Array2D& uz = f.u[2][j];
    const Array2D ut_r = ut.colwise() * ir;
    for (std::size_t c = 0; c < 3; ++c) {
      const ScalarField fc(f.grid, f.u[c][j]);
      const Array2D adv = ur * d_r(fc).values() + ut_r * dth[c][j] + uz * d_z(fc).values();
      out[c][j] = -adv;
    }
    out[0][j] += ut_r * ut;
    out[1][j] -= ut_r * ur;
  }
  return out;
}

// Mode-k projection of the oracle nonlinearity, in ModeVelocity layout.
inline ModeVelocity nonlinear_term_projection(const FullField& f, int k, int N) {
  const int m = k * N;
  if (2 * m >= f.n_theta) throw InvalidArgument("nonlinear_term_projection: unresolved wavenumber");
  const auto nl = oracle_nonlinear(f);
  auto [cr, sr] = detail::theta_coeffs(nl[0], m);
  auto [ct, st] = detail::theta_coeffs(nl[1], m);
  auto [cz, sz] = detail::theta_coeffs(nl[2], m);
  ModeVelocity u(k, f.grid);
  u.ur() = ScalarField(f.grid, cr);
  u.uth() = ScalarField(f.grid, ct);
  u.uz() = ScalarField(f.grid, cz);
  if (k > 0) {
    u.vr() = ScalarField(f.grid, sr);
    u.vth() = ScalarField(f.grid, st);
    u.vz() = ScalarField(f.grid, sz);
  }
  return u;
}

// Largest relative node-wise divergence of the full field.
inline double full_divergence_residual(const FullField& f) {
  const auto dth = detail::d_theta(f.u[1]);
  double num = 0.0, scale = 0.0;
  for (std::size_t j = 0; j < f.u[0].size(); ++j) {
    const ScalarField ur(f.grid, f.u[0][j]), uz(f.grid, f.u[2][j]);
    const Array2D div = d_r(ur).values() + over_r(ur).values() + d_z(uz).values() +
                        (dth[j].colwise() * f.grid->inv_r().array());
    num = std::max(num, div.abs().maxCoeff());
    for (const auto& c : f.u) scale = std::max(scale, d_r(ScalarField(f.grid, c[j])).max_abs());
  }
  return scale > 0.0 ? num / scale : 0.0;
}

struct OracleConfig {
  double dt = 1e-3;
  // Weight of the new time level in the viscous term: 1 backward Euler,
  // 1/2 Crank-Nicolson.
  double theta_scheme = 1.0;
  bool nonlinear = true;
  // Keep only theta wavenumbers that are multiples of N up to K N.
  bool mode_filter = false;
};

// Linear solve per (m, z-wavenumber) with cached factorizations.
class OracleSolver {
 public:
  OracleSolver(GridPtr grid, int n_theta, Params params, OracleConfig cfg)
      : grid_(std::move(grid)), nt_(n_theta), params_(params), cfg_(cfg) {
    if (n_theta < 4 || n_theta % 2 != 0 || n_theta > 128)
      throw InvalidArgument("OracleSolver: n_theta must be even, in [4, 128]");
    if (!(cfg.dt > 0.0)) throw InvalidArgument("OracleSolver: dt must be > 0");
    if (!(cfg.theta_scheme > 0.0 && cfg.theta_scheme <= 1.0))
      throw InvalidArgument("OracleSolver: theta_scheme must lie in (0, 1]");
    const int n = grid_->n_r();
    const int m = n - 1;
    const Eigen::MatrixXd d = grid_->diff_r().leftCols(m);
    stiff_ = d.transpose() * grid_->radial_weights().asDiagonal() * d;
    div_r_ = d;
    for (int i = 0; i < m; ++i) div_r_(i, i) += grid_->inv_r()(i);
    factors_.resize(static_cast<std::size_t>((nt_ / 2 + 1) * grid_->n_z()));
  }

  const Params& params() const { return params_; }
  const OracleConfig& config() const { return cfg_; }

  // One IMEX step: explicit nonlinearity at t^n, theta-scheme viscous term.
  FullField step(const FullField& f) {
    const CylGrid& g = *grid_;
    if (f.n_theta != nt_) throw InvalidArgument("oracle step: n_theta mismatch");
    const int n = g.n_r(), m = n - 1, nz = g.n_z(), nt = nt_;
    const double dt = cfg_.dt;
    const double th = cfg_.theta_scheme;
    std::array<std::vector<Array2D>, 3> nl;
    if (cfg_.nonlinear) {
      nl = oracle_nonlinear(f);
    } else {
      for (auto& c : nl) c.assign(static_cast<std::size_t>(nt), Array2D::Zero(n, nz));
    }
    // Spectral coefficients of u^n and of the nonlinearity: [c][m](i, q).
    auto to_spec = [&](const std::vector<Array2D>& planes) { return forward(planes); };
    std::array<std::vector<CArray2D>, 3> us, ns;
    for (int c = 0; c < 3; ++c) {
      us[static_cast<std::size_t>(c)] = to_spec(f.u[static_cast<std::size_t>(c)]);
      ns[static_cast<std::size_t>(c)] = to_spec(nl[static_cast<std::size_t>(c)]);
    }
    std::array<std::vector<CArray2D>, 3> uo;
    std::vector<CArray2D> po(static_cast<std::size_t>(nt / 2 + 1), CArray2D::Zero(n, nz));
    for (auto& c : uo) c.assign(static_cast<std::size_t>(nt / 2 + 1), CArray2D::Zero(n, nz));
    const Eigen::VectorXd& w = g.radial_weights();
    for (int mm = 0; mm <= nt / 2; ++mm) {
      if (!keep(mm)) continue;
      for (int q = 0; q < nz; ++q) {
        const double beta = beta_full(q);
        detail::CVec x(3 * m);
        for (int c = 0; c < 3; ++c)
          for (int i = 0; i < m; ++i) x(c * m + i) = us[static_cast<std::size_t>(c)][static_cast<std::size_t>(mm)](i, q);
        const detail::CMat h = energy_block(mm, beta, 0.0, 1.0);
        detail::CVec b = detail::CVec::Zero(3 * m + n + 1);
        const detail::CVec ax = h * x;
        for (int c = 0; c < 3; ++c)
          for (int i = 0; i < m; ++i)
            b(c * m + i) = w(i) * (us[static_cast<std::size_t>(c)][static_cast<std::size_t>(mm)](i, q) / dt +
                                   ns[static_cast<std::size_t>(c)][static_cast<std::size_t>(mm)](i, q)) -
                           (1.0 - th) * ax(c * m + i);
        const auto& lu = factor(mm, q);
        const detail::CVec y = lu.solve(b);
        for (int c = 0; c < 3; ++c)
          for (int i = 0; i < m; ++i) uo[static_cast<std::size_t>(c)][static_cast<std::size_t>(mm)](i, q) = y(c * m + i);
        for (int i = 0; i < n; ++i) po[static_cast<std::size_t>(mm)](i, q) = -y(3 * m + i);
      }
    }
    FullField out = FullField::zero(grid_, nt);
    for (int c = 0; c < 3; ++c) out.u[static_cast<std::size_t>(c)] = backward(uo[static_cast<std::size_t>(c)]);
    out.P = backward(po);
    out.t = f.t + dt;
    return out;
  }

 private:
  bool keep(int mm) const {
    if (mm == nt_ / 2) return false;
    if (!cfg_.mode_filter) return true;
    return mm % params_.N == 0 && mm <= params_.K * params_.N;
  }

  double beta_full(int q) const {
    const int nz = grid_->n_z();
    if (q == nz / 2) return 0.0;
    const int qq = q < nz / 2 ? q : q - nz;
    return 2.0 * kPi * qq / grid_->L_z();
  }

  // theta FFT (half spectrum) then complex z FFT; result [m](i, q).
  std::vector<CArray2D> forward(const std::vector<Array2D>& planes) const {
    const int n = grid_->n_r(), nz = grid_->n_z(), nt = nt_;
    std::vector<CArray2D> out(static_cast<std::size_t>(nt / 2 + 1), CArray2D::Zero(n, nz));
    Eigen::FFT<double> fft;
    std::vector<double> line(static_cast<std::size_t>(nt));
    std::vector<std::complex<double>> spec, zl(static_cast<std::size_t>(nz)), zs;
    std::vector<CArray2D> tmp(static_cast<std::size_t>(nt / 2 + 1), CArray2D::Zero(n, nz));
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < nz; ++l) {
        for (int j = 0; j < nt; ++j) line[static_cast<std::size_t>(j)] = planes[static_cast<std::size_t>(j)](i, l);
        fft.fwd(spec, line);
        for (int mm = 0; mm <= nt / 2; ++mm) tmp[static_cast<std::size_t>(mm)](i, l) = spec[static_cast<std::size_t>(mm)];
      }
    for (int mm = 0; mm <= nt / 2; ++mm)
      for (int i = 0; i < n; ++i) {
        for (int l = 0; l < nz; ++l) zl[static_cast<std::size_t>(l)] = tmp[static_cast<std::size_t>(mm)](i, l);
        fft.fwd(zs, zl);
        for (int q = 0; q < nz; ++q) out[static_cast<std::size_t>(mm)](i, q) = zs[static_cast<std::size_t>(q)];
      }
    return out;
  }

  std::vector<Array2D> backward(const std::vector<CArray2D>& spec) const {
    const int n = grid_->n_r(), nz = grid_->n_z(), nt = nt_;
    Eigen::FFT<double> fft;
    fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    std::vector<CArray2D> tmp(spec.size(), CArray2D::Zero(n, nz));
    std::vector<std::complex<double>> zs(static_cast<std::size_t>(nz)), zl;
    for (std::size_t mm = 0; mm < spec.size(); ++mm)
      for (int i = 0; i < n; ++i) {
        for (int q = 0; q < nz; ++q) zs[static_cast<std::size_t>(q)] = spec[mm](i, q);
        fft.inv(zl, zs);
        for (int l = 0; l < nz; ++l) tmp[mm](i, l) = zl[static_cast<std::size_t>(l)];
      }
    std::vector<Array2D> out(static_cast<std::size_t>(nt), Array2D::Zero(n, nz));
    std::vector<std::complex<double>> half(static_cast<std::size_t>(nt / 2 + 1));
    std::vector<double> line;
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < nz; ++l) {
        for (std::size_t mm = 0; mm < spec.size(); ++mm) half[mm] = tmp[mm](i, l);
        half[0] = half[0].real();
        half.back() = 0.0;
        fft.inv(line, half, static_cast<Eigen::Index>(nt));
        for (int j = 0; j < nt; ++j) out[static_cast<std::size_t>(j)](i, l) = line[static_cast<std::size_t>(j)];
      }
    return out;
  }

  // alpha W + gamma A for the e^{i m theta} e^{i beta z} velocity block.
  detail::CMat energy_block(int mm, double beta, double alpha, double gamma) const {
    const int m = grid_->n_r() - 1;
    const Eigen::VectorXd w = grid_->radial_weights().head(m);
    const Eigen::VectorXd ir2 = grid_->inv_r().head(m).array().square().matrix();
    const double nu = params_.nu;
    const Eigen::MatrixXd W = w.asDiagonal();
    const Eigen::MatrixXd Wr2 = (w.array() * ir2.array()).matrix().asDiagonal();
    const Eigen::MatrixXd base = stiff_ + nu * nu * beta * beta * W;
    const double m2 = static_cast<double>(mm) * mm;
    detail::CMat h = detail::CMat::Zero(3 * m, 3 * m);
    h.block(0, 0, m, m) = (alpha * W + gamma * (base + (1.0 + m2) * Wr2)).cast<detail::cdouble>();
    h.block(m, m, m, m) = (alpha * W + gamma * (base + (1.0 + m2) * Wr2)).cast<detail::cdouble>();
    h.block(2 * m, 2 * m, m, m) = (alpha * W + gamma * (base + m2 * Wr2)).cast<detail::cdouble>();
    // vector Laplacian coupling -(2/r^2) d_theta between the r and theta components
    h.block(0, m, m, m) = detail::cdouble(0.0, 2.0 * gamma * mm) * Wr2.cast<detail::cdouble>();
    h.block(m, 0, m, m) = detail::cdouble(0.0, -2.0 * gamma * mm) * Wr2.cast<detail::cdouble>();
    return h;
  }

  const Eigen::PartialPivLU<detail::CMat>& factor(int mm, int q) {
    auto& slot = factors_[static_cast<std::size_t>(mm * grid_->n_z() + q)];
    if (slot) return *slot;
    const int n = grid_->n_r(), m = n - 1;
    const double beta = beta_full(q);
    const Eigen::MatrixXd Wn = grid_->radial_weights().asDiagonal();
    detail::CMat b = detail::CMat::Zero(n, 3 * m);
    b.block(0, 0, n, m) = (Wn * div_r_).cast<detail::cdouble>();
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, m);
    for (int i = 0; i < m; ++i) e(i, i) = 1.0;
    const Eigen::MatrixXd ire = grid_->inv_r().asDiagonal() * e;
    b.block(0, m, n, m) = detail::cdouble(0.0, mm) * (Wn * ire).cast<detail::cdouble>();
    b.block(0, 2 * m, n, m) = detail::cdouble(0.0, beta) * (Wn * e).cast<detail::cdouble>();
    const int size = 3 * m + n + 1;
    detail::CMat kkt = detail::CMat::Zero(size, size);
    kkt.topLeftCorner(3 * m, 3 * m) = energy_block(mm, beta, 1.0 / cfg_.dt, cfg_.theta_scheme);
    kkt.block(0, 3 * m, 3 * m, n) = b.adjoint();
    kkt.block(3 * m, 0, n, 3 * m) = b;
    // pressure gauge border, only needed where the pressure has a kernel
    if (mm == 0 && beta == 0.0) {
      for (int i = 0; i < n; ++i) {
        kkt(3 * m + i, size - 1) = grid_->radial_weights()(i);
        kkt(size - 1, 3 * m + i) = grid_->radial_weights()(i);
      }
    } else {
      kkt(size - 1, size - 1) = 1.0;
    }
    slot = std::make_unique<Eigen::PartialPivLU<detail::CMat>>(kkt);
    return *slot;
  }

  GridPtr grid_;
  int nt_;
  Params params_;
  OracleConfig cfg_;
  Eigen::MatrixXd stiff_, div_r_;
  std::vector<std::unique_ptr<Eigen::PartialPivLU<detail::CMat>>> factors_;
};

inline FullField oracle_step(const FullField& f, const Params& params, double dt) {
  OracleConfig cfg;
  cfg.dt = dt;
  OracleSolver s(f.grid, f.n_theta, params, cfg);
  return s.step(f);
}

// Relative Omega-L2 distance between two mode states (physical weighting).
inline double mode_state_distance(const ModeState& a, const ModeState& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.modes.size(); ++k) {
    const double w = mode_energy_weight(static_cast<int>(k));
    num += w * mode_norm2(a.modes[k] - b.modes[k]);
    den += w * mode_norm2(b.modes[k]);
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace cylmode
