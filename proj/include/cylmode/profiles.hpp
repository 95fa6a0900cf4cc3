#pragma once

// Built-in profile families and seeded random divergence-free data.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "cylmode/errors.hpp"
#include "cylmode/grid.hpp"
#include "cylmode/state.hpp"

namespace cylmode {

// The (1-r)^2 factors make d_r a^r and a^z vanish at the wall, so the derived
// theta components satisfy the boundary condition too. Every field carries at
// least one factor of r so that f / r stays bounded at the axis.
inline InitProfile builtin_profile(const std::string& name, const GridPtr& g, double amplitude) {
  const double kz = 2.0 * kPi / g->L_z();
  auto F = [&](auto fn) { return ScalarField::from_function(g, fn); };
  ScalarField ar, az, br, bz;
  if (name == "zero") {
    ar = az = br = bz = ScalarField(g);
  } else if (name == "smooth") {
    ar = F([&](double r, double z) { return amplitude * r * (1 - r) * (1 - r) * std::sin(kz * z); });
    az = F([&](double r, double z) { return amplitude * r * (1 - r) * (1 - r) * std::cos(kz * z); });
    br = F([&](double r, double z) { return amplitude * r * (1 - r) * (1 - r) * std::cos(kz * z); });
    bz = F([&](double r, double z) { return -amplitude * r * (1 - r) * (1 - r) * std::sin(kz * z); });
  } else if (name == "two_wave") {
    ar = F([&](double r, double z) {
      return amplitude * r * (1 - r) * (1 - r) * (std::sin(kz * z) + 0.5 * std::cos(2 * kz * z));
    });
    az = F([&](double r, double z) { return amplitude * (1 - r) * (1 - r) * r * std::cos(kz * z); });
    br = F([&](double r, double z) { return amplitude * r * r * (1 - r) * (1 - r) * std::sin(2 * kz * z); });
    bz = F([&](double r, double z) { return amplitude * r * (1 - r) * (1 - r) * (0.3 + std::cos(kz * z)); });
  } else if (name == "z_independent") {
    ar = F([&](double r, double) { return amplitude * r * (1 - r) * (1 - r); });
    az = F([&](double r, double) { return amplitude * r * (1 - r) * (1 - r); });
    br = F([&](double r, double) { return amplitude * r * r * (1 - r) * (1 - r); });
    bz = F([&](double r, double) { return -amplitude * (1 - r) * (1 - r) * r; });
  } else if (name == "axis_regular") {
    // r^2 (1 - r)^2 envelope: every field vanishes on the axis, so ||u_k / r|| is finite.
    auto env = [](double r) { return r * r * (1 - r) * (1 - r); };
    ar = F([&](double r, double z) { return amplitude * env(r) * (std::sin(kz * z) + 0.5 * std::cos(2 * kz * z)); });
    az = F([&](double r, double z) { return amplitude * env(r) * (std::cos(kz * z) + 0.3 * std::sin(2 * kz * z)); });
    br = F([&](double r, double z) { return amplitude * env(r) * (std::cos(kz * z) - 0.4 * std::sin(2 * kz * z)); });
    bz = F([&](double r, double z) { return amplitude * env(r) * (std::sin(kz * z) + 0.2 * std::cos(2 * kz * z)); });
  } else {
    throw InvalidArgument("unknown profile family '" + name + "'");
  }
  return make_profile_divfree(ar, az, br, bz);
}

inline std::vector<std::string> builtin_profile_names() {
  return {"zero", "smooth", "two_wave", "z_independent", "axis_regular"};
}

// Random smooth field p(r) T(z) * factor(r): p of degree `deg` with uniform
// coefficients, T a trig polynomial with z-modes up to `qmax`.
struct RandomFieldSpec {
  int deg = 3;
  int qmax = 2;
};

inline ScalarField random_field(std::mt19937_64& rng, const GridPtr& g, const RandomFieldSpec& spec,
                                double (*factor)(double)) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> pc(static_cast<std::size_t>(spec.deg + 1));
  for (auto& c : pc) c = U(rng);
  std::vector<double> tc(static_cast<std::size_t>(2 * spec.qmax + 1));
  for (auto& c : tc) c = U(rng);
  const double kz = 2.0 * kPi / g->L_z();
  return ScalarField::from_function(g, [&](double r, double z) {
    double p = 0.0;
    for (auto it = pc.rbegin(); it != pc.rend(); ++it) p = p * r + *it;
    double t = tc[0];
    for (int q = 1; q <= spec.qmax; ++q)
      t += tc[static_cast<std::size_t>(2 * q - 1)] * std::cos(q * kz * z) +
           tc[static_cast<std::size_t>(2 * q)] * std::sin(q * kz * z);
    return factor(r) * p * t;
  });
}

namespace detail {
inline double wall_r(double r) { return r * (1 - r) * (1 - r); }
inline double wall_lin(double r) { return r * (1 - r); }
inline double wall_psi(double r) { return r * r * (1 - r) * (1 - r); }
}  // namespace detail

// Random profile (a^r, a^z, b^r, b^z) completed by the constraint.
inline InitProfile random_profile(std::mt19937_64& rng, const GridPtr& g, double amplitude,
                                  const RandomFieldSpec& spec = {}) {
  ScalarField ar = amplitude * random_field(rng, g, spec, detail::wall_r);
  ScalarField az = amplitude * random_field(rng, g, spec, detail::wall_r);
  ScalarField br = amplitude * random_field(rng, g, spec, detail::wall_r);
  ScalarField bz = amplitude * random_field(rng, g, spec, detail::wall_r);
  return make_profile_divfree(ar, az, br, bz);
}

// Random divergence-free coefficients for mode k (k = 0 uses a stream function).
inline ModeVelocity random_mode(std::mt19937_64& rng, const GridPtr& g, int k, int N,
                                double amplitude, const RandomFieldSpec& spec = {}) {
  ModeVelocity u(k, g);
  if (k == 0) {
    const ScalarField psi = random_field(rng, g, spec, detail::wall_psi);
    u.ur() = -1.0 * over_r(d_z(psi));
    u.uz() = over_r(d_r(psi));
    u.uth() = random_field(rng, g, spec, detail::wall_lin);
    // exact zeros at the wall
    for (auto& f : u.comps()) f.values().row(g->n_r() - 1).setZero();
    u *= amplitude;
    return u;
  }
  const InitProfile p = random_profile(rng, g, 1.0, spec);
  const double kn = mode_wavenumber(k, N);
  u.ur() = p.a_r;
  u.uz() = p.a_z;
  u.vr() = p.b_r;
  u.vz() = p.b_z;
  u.vth() = (1.0 / kn) * p.b_th;
  u.uth() = (1.0 / kn) * p.a_th;
  u *= amplitude;
  return u;
}

// State populated only at the listed modes.
inline ModeState random_state(std::mt19937_64& rng, const GridPtr& g, const Params& params,
                              const std::vector<int>& active, double amplitude,
                              const RandomFieldSpec& spec = {}) {
  ModeState s = ModeState::zero(g, params);
  for (int k : active) {
    if (k < 0 || k > params.K) throw InvalidArgument("random_state: mode outside 0..K");
    s.modes[static_cast<std::size_t>(k)] = random_mode(rng, g, k, params.N, amplitude, spec);
  }
  return s;
}

}  // namespace cylmode
