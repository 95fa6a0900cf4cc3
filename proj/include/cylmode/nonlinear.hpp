#pragma once

// Quadratic couplings of the mode system: the mean-mode sources, the
// u_0 - u_k couplings and the triad convolutions F_k, G_k, kept in the
// advective form term by term.

#include <array>
#include <cmath>
#include <cstdlib>
#include <utility>
#include <vector>

#include "cylmode/errors.hpp"
#include "cylmode/grid.hpp"
#include "cylmode/parallel.hpp"
#include "cylmode/state.hpp"

namespace cylmode {

// Component slots. Mode k >= 1: cos family then sin family.
enum : std::size_t { UR = 0, VTH = 1, UZ = 2, VR = 3, UTH = 4, VZ = 5 };
// Mode 0.
enum : std::size_t { UR0 = 0, UTH0 = 1, UZ0 = 2 };

// Values and meridional derivatives of every component of one mode.
struct ModeGrads {
  int k = 0;
  std::vector<Array2D> v, dr, dz;
};

inline ModeGrads mode_grads(const ModeVelocity& u) {
  ModeGrads g;
  g.k = u.k();
  for (const auto& f : u.comps()) {
    g.v.push_back(f.values());
    g.dr.push_back(d_r(f).values());
    g.dz.push_back(d_z(f).values());
  }
  return g;
}

inline std::vector<ModeGrads> state_grads(const ModeState& s) {
  std::vector<ModeGrads> out(s.modes.size());
  parallel_for(s.modes.size(), [&](std::size_t k) { out[k] = mode_grads(s.modes[k]); });
  return out;
}

// Triad output: S0 for the mean mode, (F^r, F^th, F^z, G^r, G^th, G^z) for
// k >= 1, laid out like ModeVelocity (F^th drives v^th, G^th drives u^th).
struct TriadForce {
  ModeVelocity S0;
  std::vector<ModeVelocity> FG;  // index k; FG[0] unused (empty)
};

namespace detail {

inline Array2D ugrad(const ModeGrads& a, const ModeGrads& b, std::size_t f) {
  return a.v[UR] * b.dr[f] + a.v[UZ] * b.dz[f];
}
inline Array2D vgrad(const ModeGrads& a, const ModeGrads& b, std::size_t f) {
  return a.v[VR] * b.dr[f] + a.v[VZ] * b.dz[f];
}
inline Array2D with_inv_r(const Array2D& a, const CylGrid& g) {
  return a.colwise() * g.inv_r().array();
}

inline void check_mode_index(const ModeState& s, int k, const char* who) {
  if (k < 1 || k > s.K()) throw InvalidArgument(std::string(who) + ": k must lie in 1..K");
}

// F_k and G_k from precomputed gradients.
inline ModeVelocity triad_from_grads(const ModeState& s, const std::vector<ModeGrads>& G, int k) {
  const CylGrid& g = *s.grid;
  const int K = s.K();
  const int N = s.params.N;
  std::array<Array2D, 6> acc;
  for (auto& a : acc) a = Array2D::Zero(g.n_r(), g.n_z());
  // Terms carrying 1/r are collected separately and divided once.
  std::array<Array2D, 6> acc_r;
  for (auto& a : acc_r) a = Array2D::Zero(g.n_r(), g.n_z());
  for (int k1 = 1; k1 <= K; ++k1) {
    for (int k2 = 1; k2 <= K; ++k2) {
      const bool plus = k1 + k2 == k;
      const bool diff = std::abs(k1 - k2) == k;
      if (!plus && !diff) continue;
      const ModeGrads& A = G[static_cast<std::size_t>(k1)];
      const ModeGrads& B = G[static_cast<std::size_t>(k2)];
      const double q = static_cast<double>(k2) * N;
      const auto& a = A.v;
      const auto& b = B.v;
      if (plus) {
        acc[UR] -= 0.5 * (ugrad(A, B, UR) - vgrad(A, B, VR));
        acc_r[UR] -= 0.5 * (q * (a[UTH] * b[VR] + a[VTH] * b[UR]) - (a[UTH] * b[UTH] - a[VTH] * b[VTH]));
        acc[VTH] -= 0.5 * (ugrad(A, B, VTH) + vgrad(A, B, UTH));
        acc_r[VTH] -= 0.5 * (q * (a[VTH] * b[VTH] - a[UTH] * b[UTH]) + (a[UR] * b[VTH] + a[VR] * b[UTH]));
        acc[UZ] -= 0.5 * (ugrad(A, B, UZ) - vgrad(A, B, VZ));
        acc_r[UZ] -= 0.5 * (q * (a[UTH] * b[VZ] + a[VTH] * b[UZ]));
        acc[VR] -= 0.5 * (ugrad(A, B, VR) + vgrad(A, B, UR));
        acc_r[VR] -= 0.5 * (q * (a[VTH] * b[VR] - a[UTH] * b[UR]) - (a[UTH] * b[VTH] + a[VTH] * b[UTH]));
        acc[UTH] -= 0.5 * (ugrad(A, B, UTH) - vgrad(A, B, VTH));
        acc_r[UTH] -= 0.5 * (q * (a[UTH] * b[VTH] + a[VTH] * b[UTH]) + (a[UR] * b[UTH] - a[VR] * b[VTH]));
        acc[VZ] -= 0.5 * (ugrad(A, B, VZ) + vgrad(A, B, UZ));
        acc_r[VZ] -= 0.5 * (q * (a[VTH] * b[VZ] - a[UTH] * b[UZ]));
      }
      if (diff) {
        // sum over |k1 - k2| = k
        acc[UR] -= 0.5 * (ugrad(A, B, UR) + vgrad(A, B, VR));
        acc_r[UR] -= 0.5 * (q * (a[UTH] * b[VR] - a[VTH] * b[UR]) - (a[UTH] * b[UTH] + a[VTH] * b[VTH]));
        acc[UZ] -= 0.5 * (ugrad(A, B, UZ) + vgrad(A, B, VZ));
        acc_r[UZ] -= 0.5 * (q * (a[UTH] * b[VZ] - a[VTH] * b[UZ]));
        acc[UTH] -= 0.5 * (ugrad(A, B, UTH) + vgrad(A, B, VTH));
        acc_r[UTH] -= 0.5 * (q * (a[UTH] * b[VTH] - a[VTH] * b[UTH]) + (a[UR] * b[UTH] + a[VR] * b[VTH]));
        // (sum_{k1-k2=k} - sum_{k2-k1=k})
        const double sg = 0.5 * (k1 > k2 ? 1.0 : -1.0);
        acc[VTH] += sg * (ugrad(A, B, VTH) - vgrad(A, B, UTH));
        acc_r[VTH] += sg * (-q * (a[UTH] * b[UTH] + a[VTH] * b[VTH]) + (a[UR] * b[VTH] - a[VR] * b[UTH]));
        acc[VR] += sg * (ugrad(A, B, VR) - vgrad(A, B, UR));
        acc_r[VR] += sg * (-q * (a[UTH] * b[UR] + a[VTH] * b[VR]) - (a[UTH] * b[VTH] - a[VTH] * b[UTH]));
        acc[VZ] += sg * (ugrad(A, B, VZ) - vgrad(A, B, UZ));
        acc_r[VZ] += sg * (-q * (a[UTH] * b[UZ] + a[VTH] * b[VZ]));
      }
    }
  }
  ModeVelocity out(k, s.grid);
  for (std::size_t c = 0; c < 6; ++c)
    out[c] = ScalarField(s.grid, acc[c] + with_inv_r(acc_r[c], g));
  return out;
}

inline ModeVelocity mean_source_from_grads(const ModeState& s, const std::vector<ModeGrads>& G) {
  const CylGrid& g = *s.grid;
  const int N = s.params.N;
  const auto& z = G[0].v;
  std::array<Array2D, 3> acc, acc_r;
  for (auto& a : acc) a = Array2D::Zero(g.n_r(), g.n_z());
  acc_r[0] = z[UTH0] * z[UTH0];
  acc_r[1] = -z[UTH0] * z[UR0];
  acc_r[2] = Array2D::Zero(g.n_r(), g.n_z());
  for (int k = 1; k <= s.K(); ++k) {
    const ModeGrads& A = G[static_cast<std::size_t>(k)];
    const auto& a = A.v;
    const double q = static_cast<double>(k) * N;
    acc[0] -= 0.5 * (ugrad(A, A, UR) + vgrad(A, A, VR));
    acc_r[0] -= 0.5 * (q * (a[UTH] * a[VR] - a[VTH] * a[UR]) - (a[UTH] * a[UTH] + a[VTH] * a[VTH]));
    acc[1] -= 0.5 * (ugrad(A, A, UTH) + vgrad(A, A, VTH));
    acc_r[1] -= 0.5 * (a[UR] * a[UTH] + a[VR] * a[VTH]);
    acc[2] -= 0.5 * (ugrad(A, A, UZ) + vgrad(A, A, VZ));
    acc_r[2] -= 0.5 * (q * (a[UTH] * a[VZ] - a[VTH] * a[UZ]));
  }
  ModeVelocity out(0, s.grid);
  for (std::size_t c = 0; c < 3; ++c) out[c] = ScalarField(s.grid, acc[c] + with_inv_r(acc_r[c], g));
  return out;
}

inline ModeVelocity u0_coupling_from_grads(const ModeState& s, const std::vector<ModeGrads>& G, int k) {
  const CylGrid& g = *s.grid;
  const ModeGrads& Z = G[0];
  const ModeGrads& A = G[static_cast<std::size_t>(k)];
  const auto& z = Z.v;
  const auto& a = A.v;
  const double q = static_cast<double>(k) * s.params.N;
  // u~_k . grad~ f_0 and v~_k . grad~ f_0
  auto ug = [&](std::size_t f) -> Array2D { return a[UR] * Z.dr[f] + a[UZ] * Z.dz[f]; };
  auto vg = [&](std::size_t f) -> Array2D { return a[VR] * Z.dr[f] + a[VZ] * Z.dz[f]; };
  std::array<Array2D, 6> lin, over;
  lin[UR] = -ug(UR0);
  over[UR] = -q * z[UTH0] * a[VR] + 2.0 * z[UTH0] * a[UTH];
  lin[VTH] = -vg(UTH0);
  over[VTH] = q * z[UTH0] * a[UTH] - (z[UR0] * a[VTH] + z[UTH0] * a[VR]);
  lin[UZ] = -ug(UZ0);
  over[UZ] = -q * z[UTH0] * a[VZ];
  lin[VR] = -vg(UR0);
  over[VR] = q * z[UTH0] * a[UR] + 2.0 * z[UTH0] * a[VTH];
  lin[UTH] = -ug(UTH0);
  over[UTH] = -q * z[UTH0] * a[VTH] - (z[UR0] * a[UTH] + z[UTH0] * a[UR]);
  lin[VZ] = -vg(UZ0);
  over[VZ] = q * z[UTH0] * a[UZ];
  ModeVelocity out(k, s.grid);
  for (std::size_t c = 0; c < 6; ++c) out[c] = ScalarField(s.grid, lin[c] + with_inv_r(over[c], g));
  return out;
}

// -(u^r_0 d_r + u^z_0 d_z) applied to every component of mode k.
inline ModeVelocity transport_from_grads(const ModeState& s, const std::vector<ModeGrads>& G, int k) {
  const ModeGrads& Z = G[0];
  const ModeGrads& A = G[static_cast<std::size_t>(k)];
  ModeVelocity out(k, s.grid);
  for (std::size_t c = 0; c < A.v.size(); ++c)
    out[c] = ScalarField(s.grid, -(Z.v[UR0] * A.dr[c] + Z.v[UZ0] * A.dz[c]));
  return out;
}

}  // namespace detail

// Right side of the mean-mode momentum equations without the u_0 transport.
inline ModeVelocity compute_mean_source(const ModeState& s) {
  return detail::mean_source_from_grads(s, state_grads(s));
}

inline ModeVelocity compute_triad_force(const ModeState& s, int k) {
  detail::check_mode_index(s, k, "compute_triad_force");
  return detail::triad_from_grads(s, state_grads(s), k);
}

inline TriadForce compute_all_triads(const ModeState& s) {
  const auto G = state_grads(s);
  TriadForce t;
  t.S0 = detail::mean_source_from_grads(s, G);
  t.FG.resize(s.modes.size());
  parallel_for(s.modes.size() - 1, [&](std::size_t i) {
    t.FG[i + 1] = detail::triad_from_grads(s, G, static_cast<int>(i + 1));
  });
  return t;
}

// Stretching and rotation terms driven by u_0 in the mode-k equations.
inline ModeVelocity compute_u0_coupling(const ModeState& s, int k) {
  detail::check_mode_index(s, k, "compute_u0_coupling");
  std::vector<ModeGrads> G(static_cast<std::size_t>(k) + 1);
  G[0] = mode_grads(s.modes[0]);
  G[static_cast<std::size_t>(k)] = mode_grads(s.modes[static_cast<std::size_t>(k)]);
  return detail::u0_coupling_from_grads(s, G, k);
}

// All explicit terms: N_0 = S_0 - u_0 . grad~ u_0 and, for k >= 1,
// N_k = coupling + (F_k, G_k) - u_0 . grad~ u_k.
inline std::vector<ModeVelocity> explicit_rhs(const ModeState& s) {
  const auto G = state_grads(s);
  std::vector<ModeVelocity> out(s.modes.size());
  parallel_for(s.modes.size(), [&](std::size_t i) {
    const int k = static_cast<int>(i);
    if (k == 0) {
      out[0] = detail::mean_source_from_grads(s, G) + detail::transport_from_grads(s, G, 0);
    } else {
      ModeVelocity n = detail::triad_from_grads(s, G, k);
      n += detail::u0_coupling_from_grads(s, G, k);
      n += detail::transport_from_grads(s, G, k);
      out[i] = std::move(n);
    }
  });
  return out;
}

// Physical ||grad u||^2 scale: sum_k w_k sum_c (||d_r c||^2 + ||d_z c||^2 + (1 + (kN)^2) ||c/r||^2).
inline double gradient_scale2(const ModeState& s) {
  double g2 = 0.0;
  for (const auto& m : s.modes) {
    const double kn = mode_wavenumber(m.k(), s.params.N);
    double acc = 0.0;
    for (const auto& f : m.comps())
      acc += norm2(d_r(f)) + norm2(d_z(f)) + (1.0 + kn * kn) * norm2(over_r(f));
    g2 += mode_energy_weight(m.k()) * acc;
  }
  return g2;
}

// Total quadratic flux T = (N_0 | u_0) + 1/2 sum_k (N_k | u_k).
inline double nonlinear_flux(const ModeState& s, const std::vector<ModeVelocity>& rhs) {
  double t = 0.0;
  for (std::size_t k = 0; k < s.modes.size(); ++k) {
    double acc = 0.0;
    for (std::size_t c = 0; c < s.modes[k].size(); ++c)
      acc += kThetaMeasure * inner(rhs[k][c], s.modes[k][c]);
    t += mode_energy_weight(static_cast<int>(k)) * acc;
  }
  return t;
}

// |T| / (||u||^2 ||grad u||), zero for the zero state.
inline double flux_identity_residual(const ModeState& s) {
  const double e = total_energy(s);
  const double g = std::sqrt(gradient_scale2(s));
  if (e == 0.0 || g == 0.0) return 0.0;
  return std::abs(nonlinear_flux(s, explicit_rhs(s))) / (e * g);
}

struct TriadBound {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio() const { return rhs > 0.0 ? lhs / rhs : 0.0; }
};

namespace detail {

inline Array2D magnitude(const std::vector<Array2D>& c) {
  Array2D m = Array2D::Zero(c[0].rows(), c[0].cols());
  for (const auto& a : c) m += a.square();
  return m.sqrt();
}

inline Array2D grad_magnitude(const ModeGrads& g) {
  Array2D m = Array2D::Zero(g.v[0].rows(), g.v[0].cols());
  for (std::size_t c = 0; c < g.v.size(); ++c) m += g.dr[c].square() + g.dz[c].square();
  return m.sqrt();
}

}  // namespace detail

// lhs = |((F_k, G_k) | u_k)|, rhs = sum over admissible triads of
// int |u_k1| |u_k2| (|grad~ u_k| + kN |u_k / r|). With dz = true the
// z-derivative version: lhs = |(d_z (F_k, G_k) | d_z u_k)| and the product
// rule on |u_k1||u_k2|.
inline TriadBound triad_bound_check(const ModeState& s, int k, bool dz = false) {
  detail::check_mode_index(s, k, "triad_bound_check");
  const CylGrid& g = *s.grid;
  const int K = s.K();
  const auto G = state_grads(s);
  const ModeVelocity fg = detail::triad_from_grads(s, G, k);
  const ModeVelocity& uk = s.modes[static_cast<std::size_t>(k)];
  TriadBound b;
  for (std::size_t c = 0; c < 6; ++c)
    b.lhs += kThetaMeasure * (dz ? inner(d_z(fg[c]), d_z(uk[c])) : inner(fg[c], uk[c]));
  b.lhs = std::abs(b.lhs);
  // per-mode magnitudes
  std::vector<Array2D> mag(static_cast<std::size_t>(K + 1)), dmag(static_cast<std::size_t>(K + 1));
  for (int j = 1; j <= K; ++j) {
    const auto& gj = G[static_cast<std::size_t>(j)];
    mag[static_cast<std::size_t>(j)] = detail::magnitude(gj.v);
    dmag[static_cast<std::size_t>(j)] = detail::magnitude(gj.dz);
  }
  const double kn = mode_wavenumber(k, s.params.N);
  Array2D test;
  if (dz) {
    const ModeGrads gz = mode_grads([&] {
      ModeVelocity d = uk;
      for (auto& f : d.comps()) f = d_z(f);
      return d;
    }());
    test = detail::grad_magnitude(gz) + kn * detail::with_inv_r(detail::magnitude(gz.v), g);
  } else {
    const ModeGrads& gk = G[static_cast<std::size_t>(k)];
    test = detail::grad_magnitude(gk) + kn * detail::with_inv_r(detail::magnitude(gk.v), g);
  }
  for (int k1 = 1; k1 <= K; ++k1)
    for (int k2 = 1; k2 <= K; ++k2) {
      if (k1 + k2 != k && std::abs(k1 - k2) != k) continue;
      const auto i1 = static_cast<std::size_t>(k1);
      const auto i2 = static_cast<std::size_t>(k2);
      const Array2D pair = dz ? Array2D(dmag[i1] * mag[i2] + mag[i1] * dmag[i2]) : Array2D(mag[i1] * mag[i2]);
      b.rhs += kThetaMeasure * (g.quad_w() * pair * test).sum();
    }
  return b;
}

}  // namespace cylmode
