#pragma once

// Azimuthal mode expansion of the velocity: the mean mode u_0 and, for each
// k >= 1, the coefficients of cos(kN theta) and sin(kN theta).

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "cylmode/errors.hpp"
#include "cylmode/grid.hpp"

namespace cylmode {

struct Params {
  double nu = 1.0;
  int N = 8;
  double delta = 0.0;
  double eta = 0.25;
  int K = 4;
  int m = 3;
  double sigma = 0.4;
  double small_eps = 0.1;

  void validate() const {
    std::vector<std::string> errs = problems();
    if (errs.empty()) return;
    std::string msg = "invalid parameters:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw InvalidArgument(msg);
  }

  std::vector<std::string> problems() const {
    std::vector<std::string> e;
    if (!(nu >= 0.0) || !std::isfinite(nu)) e.emplace_back("nu must be >= 0");
    if (N < 2) e.emplace_back("N must be an integer >= 2");
    if (!(delta >= 0.0 && delta < 0.25)) e.emplace_back("delta must lie in [0, 1/4)");
    if (!(eta >= 0.0 && eta < 0.5 - delta)) e.emplace_back("eta must lie in [0, 1/2 - delta)");
    if (K < 2) e.emplace_back("K must be >= 2");
    if (m < 3) e.emplace_back("m must be an integer >= 3");
    if (m >= 3 && !(sigma > 1.0 / (2.0 * m - 3.0) && sigma < 0.5))
      e.emplace_back("sigma must lie strictly inside (1/(2m-3), 1/2)");
    if (!(small_eps > 0.0)) e.emplace_back("small_eps must be > 0");
    return e;
  }
};

// Component layout. Mode 0: (u^r_0, u^theta_0, u^z_0). Mode k >= 1: the cos
// family (u^r_k, v^theta_k, u^z_k) followed by the sin family
// (v^r_k, u^theta_k, v^z_k). In physical space
//   u^r = u^r_0 + sum (u^r_k cos + v^r_k sin),
//   u^theta = u^theta_0 + sum (u^theta_k cos + v^theta_k sin),
//   u^z = u^z_0 + sum (u^z_k cos + v^z_k sin).
class ModeVelocity {
 public:
  ModeVelocity() = default;
  ModeVelocity(int k, const GridPtr& grid) : k_(k) {
    if (k < 0) throw InvalidArgument("ModeVelocity: negative mode index");
    c_.assign(k == 0 ? 3 : 6, ScalarField(grid));
  }

  int k() const { return k_; }
  std::size_t size() const { return c_.size(); }
  ScalarField& operator[](std::size_t i) { return c_[i]; }
  const ScalarField& operator[](std::size_t i) const { return c_[i]; }
  std::vector<ScalarField>& comps() { return c_; }
  const std::vector<ScalarField>& comps() const { return c_; }

  const ScalarField& ur() const { return c_[0]; }
  const ScalarField& uz() const { return c_[2]; }
  const ScalarField& uth() const { return k_ == 0 ? c_[1] : c_[4]; }
  const ScalarField& vth() const { return at(1); }
  const ScalarField& vr() const { return at(3); }
  const ScalarField& vz() const { return at(5); }
  ScalarField& ur() { return c_[0]; }
  ScalarField& uz() { return c_[2]; }
  ScalarField& uth() { return k_ == 0 ? c_[1] : c_[4]; }
  ScalarField& vth() { return at(1); }
  ScalarField& vr() { return at(3); }
  ScalarField& vz() { return at(5); }

  ModeVelocity& operator+=(const ModeVelocity& o) {
    check(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  ModeVelocity& operator-=(const ModeVelocity& o) {
    check(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  ModeVelocity& operator*=(double s) {
    for (auto& f : c_) f *= s;
    return *this;
  }
  friend ModeVelocity operator+(ModeVelocity a, const ModeVelocity& b) { return a += b; }
  friend ModeVelocity operator-(ModeVelocity a, const ModeVelocity& b) { return a -= b; }
  friend ModeVelocity operator*(double s, ModeVelocity a) { return a *= s; }

  double max_abs() const {
    double m = 0.0;
    for (const auto& f : c_) m = std::max(m, f.max_abs());
    return m;
  }

 private:
  ScalarField& at(std::size_t i) {
    if (k_ == 0) throw InvalidArgument("mode 0 has no sin-family components");
    return c_[i];
  }
  const ScalarField& at(std::size_t i) const {
    if (k_ == 0) throw InvalidArgument("mode 0 has no sin-family components");
    return c_[i];
  }
  void check(const ModeVelocity& o) const {
    if (o.k_ != k_ || o.c_.size() != c_.size())
      throw InvalidArgument("ModeVelocity: mode mismatch");
  }

  int k_ = 0;
  std::vector<ScalarField> c_;
};

// Mode 0: {P_0}; mode k >= 1: {P_k, Q_k}.
struct ModePressure {
  std::vector<ScalarField> c;
};

struct ModeState {
  double t = 0.0;
  Params params;
  GridPtr grid;
  std::vector<ModeVelocity> modes;
  std::vector<ModePressure> pressures;

  static ModeState zero(const GridPtr& grid, const Params& params) {
    ModeState s;
    s.params = params;
    s.grid = grid;
    for (int k = 0; k <= params.K; ++k) {
      s.modes.emplace_back(k, grid);
      ModePressure p;
      p.c.assign(k == 0 ? 1 : 2, ScalarField(grid));
      s.pressures.push_back(std::move(p));
    }
    return s;
  }

  int K() const { return static_cast<int>(modes.size()) - 1; }
};

// Effective azimuthal wavenumber of mode k in the mode equations.
inline double mode_wavenumber(int k, int N) { return static_cast<double>(k) * N; }

struct InitProfile {
  ScalarField a_r, a_th, a_z, b_r, b_th, b_z;

  std::array<const ScalarField*, 6> fields() const {
    return {&a_r, &a_th, &a_z, &b_r, &b_th, &b_z};
  }
  const GridPtr& grid_ptr() const { return a_r.grid_ptr(); }
};

namespace detail {

inline double boundary_max(const ScalarField& f) {
  return f.values().row(f.grid().n_r() - 1).abs().maxCoeff();
}

// theta-free divergence part: d_r f + f/r + d_z g
inline ScalarField meridional_div(const ScalarField& fr, const ScalarField& fz) {
  return d_r(fr) + over_r(fr) + d_z(fz);
}

}  // namespace detail

// Solves the two profile constraints for b^theta and a^theta.
inline InitProfile make_profile_divfree(const ScalarField& a_r, const ScalarField& a_z,
                                        const ScalarField& b_r, const ScalarField& b_z) {
  a_r.check_compatible(a_z);
  a_r.check_compatible(b_r);
  a_r.check_compatible(b_z);
  double scale = 1.0;
  for (const auto* f : {&a_r, &a_z, &b_r, &b_z}) scale = std::max(scale, f->max_abs());
  for (const auto* f : {&a_r, &a_z, &b_r, &b_z})
    if (detail::boundary_max(*f) > 1e-12 * scale)
      throw DomainError("make_profile_divfree: input does not vanish at r = 1");
  InitProfile p;
  p.a_r = a_r;
  p.a_z = a_z;
  p.b_r = b_r;
  p.b_z = b_z;
  p.b_th = -1.0 * times_r(detail::meridional_div(a_r, a_z));
  p.a_th = times_r(detail::meridional_div(b_r, b_z));
  return p;
}

// Largest |value| at r = 1 over the six profile fields.
inline double profile_boundary_residual(const InitProfile& p) {
  double m = 0.0;
  for (const auto* f : p.fields()) m = std::max(m, detail::boundary_max(*f));
  return m;
}

// Max of the two constraint residuals at the nodes, relative to the profile scale.
inline double profile_divergence_residual(const InitProfile& p) {
  const ScalarField e1 = detail::meridional_div(p.a_r, p.a_z) + over_r(p.b_th);
  const ScalarField e2 = detail::meridional_div(p.b_r, p.b_z) - over_r(p.a_th);
  double scale = 0.0;
  for (const auto* f : p.fields()) scale = std::max(scale, f->max_abs());
  if (scale == 0.0) return 0.0;
  return std::max(e1.max_abs(), e2.max_abs()) / scale;
}

inline ModeState make_initial_state(const InitProfile& profile, const Params& params,
                                    const GridPtr& grid) {
  params.validate();
  for (const auto* f : profile.fields()) {
    if (f->empty()) throw InvalidArgument("make_initial_state: profile field not set");
    if (f->grid_ptr() != grid && !f->grid().same_shape(*grid))
      throw InvalidArgument("make_initial_state: profile grid does not match the state grid");
  }
  ModeState s = ModeState::zero(grid, params);
  const double amp = std::pow(static_cast<double>(params.N), params.delta);
  const double amp_th = std::pow(static_cast<double>(params.N), params.delta - 1.0);
  ModeVelocity& u1 = s.modes[1];
  u1.ur() = amp * profile.a_r;
  u1.vth() = amp_th * profile.b_th;
  u1.uz() = amp * profile.a_z;
  u1.vr() = amp * profile.b_r;
  u1.uth() = amp_th * profile.a_th;
  u1.vz() = amp * profile.b_z;
  return s;
}

inline ModeState make_initial_state(const InitProfile& profile, const Params& params) {
  return make_initial_state(profile, params, profile.grid_ptr());
}

// Divergence expressions of one mode: one field for k = 0, two for k >= 1.
inline std::vector<ScalarField> mode_divergence(const ModeVelocity& u, int N) {
  if (u.k() == 0) return {detail::meridional_div(u.ur(), u.uz())};
  const double kn = mode_wavenumber(u.k(), N);
  return {detail::meridional_div(u.ur(), u.uz()) + kn * over_r(u.vth()),
          detail::meridional_div(u.vr(), u.vz()) - kn * over_r(u.uth())};
}

// sum over components of |f|^2 + |d_r f|^2 + |d_z f|^2, Omega-norm convention.
inline double mode_h1_norm2(const ModeVelocity& u) {
  double s = 0.0;
  for (const auto& f : u.comps()) s += norm2(f) + norm2(d_r(f)) + norm2(d_z(f));
  return s;
}

inline double mode_divergence_residual(const ModeVelocity& u, int N) {
  const double h1 = mode_h1_norm2(u);
  if (h1 == 0.0) return 0.0;
  double s = 0.0;
  for (const auto& d : mode_divergence(u, N)) s += norm2(d);
  return std::sqrt(s / h1);
}

inline std::vector<double> divergence_residual(const ModeState& state) {
  std::vector<double> out;
  out.reserve(state.modes.size());
  for (const auto& m : state.modes) out.push_back(mode_divergence_residual(m, state.params.N));
  return out;
}

// Cylindrical components (u^r, u^theta, u^z) at a point.
inline std::array<double, 3> reconstruct_point(const ModeState& state, double r, double theta,
                                               double z) {
  const CylGrid& g = *state.grid;
  if (!(r > 0.0 && r <= 1.0)) throw DomainError("reconstruct_point: r must lie in (0, 1]");
  if (!(z >= 0.0 && z < g.L_z())) throw DomainError("reconstruct_point: z must lie in [0, L_z)");
  const Eigen::VectorXd wr = g.radial_interp_weights(r);
  const Eigen::VectorXd wz = g.z_interp_weights(z);
  auto at = [&](const ScalarField& f) { return wr.dot(f.values().matrix() * wz); };
  std::array<double, 3> u{};
  const ModeVelocity& m0 = state.modes[0];
  u[0] = at(m0.ur());
  u[1] = at(m0.uth());
  u[2] = at(m0.uz());
  for (std::size_t k = 1; k < state.modes.size(); ++k) {
    const ModeVelocity& m = state.modes[k];
    const double a = mode_wavenumber(static_cast<int>(k), state.params.N) * theta;
    const double c = std::cos(a);
    const double s = std::sin(a);
    u[0] += c * at(m.ur()) + s * at(m.vr());
    u[1] += c * at(m.uth()) + s * at(m.vth());
    u[2] += c * at(m.uz()) + s * at(m.vz());
  }
  return u;
}

// Omega-norm^2 of a mode's coefficient vector (sum over its components).
inline double mode_norm2(const ModeVelocity& u) {
  double s = 0.0;
  for (const auto& f : u.comps()) s += norm2(f);
  return s;
}

// Share of mode k in the physical energy: the mean mode counts fully, a
// cos/sin pair carries the factor 1/2 from the theta average.
inline double mode_energy_weight(int k) { return k == 0 ? 1.0 : 0.5; }

// Physical Omega-norm^2 of the reconstructed velocity.
inline double total_energy(const ModeState& s) {
  double e = 0.0;
  for (const auto& m : s.modes) e += mode_energy_weight(m.k()) * mode_norm2(m);
  return e;
}

}  // namespace cylmode
