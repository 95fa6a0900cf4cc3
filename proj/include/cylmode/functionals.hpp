#pragma once

// Weighted energy functionals E_j, D_j, decay weights and the reports that
// compare a run with the predicted per-mode decay.

#include <algorithm>
#include <climits>
#include <limits>
#include <cmath>
#include <string>
#include <vector>

#include "cylmode/errors.hpp"
#include "cylmode/grid.hpp"
#include "cylmode/state.hpp"

namespace cylmode {

// Norms of one mode at one derivative order j (squared, Omega convention).
struct ModeNorms {
  double l2 = 0.0;      // ||d_z^j u_k||^2
  double grad = 0.0;    // ||grad~ d_z^j u_k||^2 (d_r and d_z)
  double grad_r = 0.0;  // ||d_r d_z^j u_k||^2
  double over_r = 0.0;  // ||d_z^j u_k / r||^2; mode 0: only (u^r_0, u^th_0)
};

// Mixed space-time norms for the Lemma 3.3 table (j = 0, 1 for L4h(L2v)).
struct MixedNorms {
  double l4h_l2v[2] = {0.0, 0.0};  // || |d_z^j u_k| ||_{L4h(L2v)}
  double l4h_linf = 0.0;           // || |u_k| ||_{L4h(Linf v)}
  double grad_l2h_linf = 0.0;      // || |grad~ u_k| ||_{L2h(Linf v)}
  double over_r_l2h_linf = 0.0;    // || |u_k| / r ||_{L2h(Linf v)}, mode 0: (u^r_0, u^th_0)
};

inline std::vector<ModeNorms> mode_norms(const ModeVelocity& u, int j_max) {
  std::vector<ModeNorms> out(static_cast<std::size_t>(j_max + 1));
  for (int j = 0; j <= j_max; ++j) {
    ModeNorms& n = out[static_cast<std::size_t>(j)];
    for (std::size_t c = 0; c < u.size(); ++c) {
      const ScalarField f = d_z(u[c], j);
      const double gr = norm2(d_r(f));
      n.l2 += norm2(f);
      n.grad_r += gr;
      n.grad += gr + norm2(d_z(f));
      if (u.k() > 0 || c != 2) n.over_r += norm2(over_r(f));
    }
  }
  return out;
}

namespace detail {
inline ScalarField magnitude_field(const std::vector<ScalarField>& c) {
  Array2D m = Array2D::Zero(c[0].values().rows(), c[0].values().cols());
  for (const auto& f : c) m += f.values().square();
  return {c[0].grid_ptr(), m.sqrt()};
}
}  // namespace detail

inline MixedNorms mixed_norms(const ModeVelocity& u) {
  MixedNorms m;
  for (int j = 0; j < 2; ++j) {
    std::vector<ScalarField> c;
    for (const auto& f : u.comps()) c.push_back(d_z(f, j));
    m.l4h_l2v[j] = norm_lp_h_lq_v(detail::magnitude_field(c), 4.0, 2.0);
  }
  m.l4h_linf = norm_lp_h_lq_v(detail::magnitude_field(u.comps()), 4.0, kInf);
  std::vector<ScalarField> g, o;
  for (std::size_t c = 0; c < u.size(); ++c) {
    g.push_back(d_r(u[c]));
    g.push_back(d_z(u[c]));
    if (u.k() > 0 || c != 2) o.push_back(over_r(u[c]));
  }
  m.grad_l2h_linf = norm_lp_h_lq_v(detail::magnitude_field(g), 2.0, kInf);
  m.over_r_l2h_linf = norm_lp_h_lq_v(detail::magnitude_field(o), 2.0, kInf);
  return m;
}

// Running sup-in-time and time-integrated norms of every mode.
class EnergyHistory {
 public:
  EnergyHistory() = default;
  EnergyHistory(const Params& params, int j_max = 1, bool mixed = false)
      : params_(params), j_max_(j_max), mixed_(mixed) {
    if (j_max < 1) throw InvalidArgument("EnergyHistory: j_max must be >= 1");
    const auto K1 = static_cast<std::size_t>(params.K + 1);
    const auto J1 = static_cast<std::size_t>(j_max + 1);
    sup_.assign(K1, std::vector<double>(J1, 0.0));
    integ_.assign(K1, std::vector<ModeNorms>(J1));
    last_.assign(K1, std::vector<ModeNorms>(J1));
    mixed_integ_.assign(K1, MixedNorms{});
    last_mixed_.assign(K1, MixedNorms{});
    prev_.assign(K1, std::vector<ModeNorms>(J1));
    err_.assign(K1, std::vector<double>(J1, 0.0));
  }

  const Params& params() const { return params_; }
  int j_max() const { return j_max_; }
  bool mixed_enabled() const { return mixed_; }
  int K() const { return params_.K; }
  bool empty() const { return times_.empty(); }
  const std::vector<double>& times() const { return times_; }

  // sup over snapshots of ||d_z^j u_k||^2
  double sup_l2(int k, int j) const { return sup_[idx(k)][idx(j)]; }
  // running integrals of the squared norms
  const ModeNorms& integral(int k, int j) const { return integ_[idx(k)][idx(j)]; }
  const ModeNorms& latest(int k, int j) const { return last_[idx(k)][idx(j)]; }
  // time integrals of 4th powers (L4 in time) or squares (L2 in time) of the mixed norms
  const MixedNorms& mixed_integral(int k) const { return mixed_integ_[idx(k)]; }
  // Trapezoid error estimate of the running integrals of (k, j): sum over
  // steps of h |second difference| / 12, all four integrands together.
  double integral_error(int k, int j) const { return err_[idx(k)][idx(j)]; }
  // ||u_k(t)||^2 per snapshot
  const std::vector<std::vector<double>>& energy_series() const { return series_; }

  // ||d_z^j alpha|| for j = 0..m+1, when the run started from a profile
  std::vector<double> profile_norms;
  int snapshot_cadence = 1;

  void accumulate(const ModeState& s) {
    if (s.K() != params_.K) throw InvalidArgument("accumulate: K mismatch");
    if (!times_.empty() && !(s.t > times_.back()))
      throw InvalidArgument("accumulate: snapshot time must increase");
    const auto K1 = s.modes.size();
    std::vector<std::vector<ModeNorms>> now(K1);
    std::vector<MixedNorms> mnow(K1);
    for (std::size_t k = 0; k < K1; ++k) {
      now[k] = mode_norms(s.modes[k], j_max_);
      if (mixed_) mnow[k] = mixed_norms(s.modes[k]);
    }
    std::vector<double> e(K1);
    for (std::size_t k = 0; k < K1; ++k) e[k] = now[k][0].l2;
    series_.push_back(e);
    if (!times_.empty()) {
      const double h = 0.5 * (s.t - times_.back());
      for (std::size_t k = 0; k < K1; ++k) {
        for (std::size_t j = 0; j < now[k].size(); ++j) {
          ModeNorms& I = integ_[k][j];
          const ModeNorms& a = last_[k][j];
          const ModeNorms& b = now[k][j];
          I.l2 += h * (a.l2 + b.l2);
          I.grad += h * (a.grad + b.grad);
          I.grad_r += h * (a.grad_r + b.grad_r);
          I.over_r += h * (a.over_r + b.over_r);
          if (times_.size() >= 2) {
            const ModeNorms& c = prev_[k][j];
            auto d2 = [](double x0, double x1, double x2) { return std::abs(x2 - 2.0 * x1 + x0); };
            err_[k][j] += 2.0 * h / 12.0 *
                          (d2(c.l2, a.l2, b.l2) + d2(c.grad, a.grad, b.grad) +
                           d2(c.grad_r, a.grad_r, b.grad_r) + d2(c.over_r, a.over_r, b.over_r));
          }
        }
        if (mixed_) {
          MixedNorms& I = mixed_integ_[k];
          const MixedNorms& a = last_mixed_[k];
          const MixedNorms& b = mnow[k];
          for (int j = 0; j < 2; ++j) I.l4h_l2v[j] += h * (p4(a.l4h_l2v[j]) + p4(b.l4h_l2v[j]));
          I.l4h_linf += h * (p4(a.l4h_linf) + p4(b.l4h_linf));
          I.grad_l2h_linf += h * (sq(a.grad_l2h_linf) + sq(b.grad_l2h_linf));
          I.over_r_l2h_linf += h * (sq(a.over_r_l2h_linf) + sq(b.over_r_l2h_linf));
        }
      }
    }
    for (std::size_t k = 0; k < K1; ++k)
      for (std::size_t j = 0; j < now[k].size(); ++j) sup_[k][j] = std::max(sup_[k][j], now[k][j].l2);
    prev_ = std::move(last_);
    last_ = std::move(now);
    if (mixed_) last_mixed_ = std::move(mnow);
    times_.push_back(s.t);
  }

  // Raw access used by serialization.
  struct Raw {
    std::vector<double> times;
    std::vector<std::vector<double>> sup;
    std::vector<std::vector<ModeNorms>> integ, last;
    std::vector<MixedNorms> mixed_integ, last_mixed;
    std::vector<std::vector<double>> series;
    std::vector<std::vector<ModeNorms>> prev;
    std::vector<std::vector<double>> err;
  };
  Raw raw() const { return {times_, sup_, integ_, last_, mixed_integ_, last_mixed_, series_, prev_, err_}; }
  void restore(Raw r) {
    times_ = std::move(r.times);
    sup_ = std::move(r.sup);
    integ_ = std::move(r.integ);
    last_ = std::move(r.last);
    mixed_integ_ = std::move(r.mixed_integ);
    last_mixed_ = std::move(r.last_mixed);
    series_ = std::move(r.series);
    prev_ = std::move(r.prev);
    err_ = std::move(r.err);
  }

 private:
  static double sq(double x) { return x * x; }
  static double p4(double x) { return x * x * x * x; }
  static std::size_t idx(int i) { return static_cast<std::size_t>(i); }

  Params params_;
  int j_max_ = 1;
  bool mixed_ = false;
  std::vector<double> times_;
  std::vector<std::vector<double>> sup_;
  std::vector<std::vector<ModeNorms>> integ_, last_;
  std::vector<MixedNorms> mixed_integ_, last_mixed_;
  std::vector<std::vector<double>> series_;
  std::vector<std::vector<ModeNorms>> prev_;
  std::vector<std::vector<double>> err_;
};

inline EnergyHistory& accumulate(EnergyHistory& h, const ModeState& s) {
  h.accumulate(s);
  return h;
}

namespace detail {
inline void check_j(int j, const EnergyHistory& h) {
  if (j < 0 || j > 1 || j > h.j_max()) throw InvalidArgument("functional: j must be 0 or 1");
}
}  // namespace detail

// E_j: sup-in-time and integrated norms with the weights k^2 N^{2 eta (k-2)}.
inline double compute_E(const EnergyHistory& h, int j, const Params& p) {
  detail::check_j(j, h);
  if (h.empty()) return 0.0;
  const double N = p.N;
  const ModeNorms& I0 = h.integral(0, j);
  double e = std::pow(N, 2.0 * (0.25 - p.eta)) * (h.sup_l2(0, j) + I0.grad + I0.over_r);
  double best = 0.0;
  for (int k = 1; k <= h.K(); ++k) {
    const ModeNorms& I = h.integral(k, j);
    const double kk = k;
    const double w = kk * kk * std::pow(N, 2.0 * p.eta * (kk - 2.0));
    best = std::max(best, w * (h.sup_l2(k, j) + I.grad + 0.5 * kk * kk * N * N * I.over_r));
  }
  return e + best;
}

// D_j: the anisotropic functional with d_r in place of grad~ and capped weights.
inline double compute_D(const EnergyHistory& h, int j, const Params& p) {
  detail::check_j(j, h);
  if (h.empty()) return 0.0;
  const double N = p.N;
  const ModeNorms& I0 = h.integral(0, j);
  double d = std::pow(N, 2.0 * (0.25 - p.eta)) * (h.sup_l2(0, j) + I0.grad_r + I0.over_r);
  const double cap = (0.5 - p.eta - p.delta) * (p.m - j);
  double best = 0.0;
  for (int k = 1; k <= h.K(); ++k) {
    const ModeNorms& I = h.integral(k, j);
    const double kk = k;
    const double w = std::pow(kk, 2.0 * p.sigma * (p.m - j)) *
                     std::pow(N, 2.0 * std::min(p.eta * (kk - 2.0), cap));
    best = std::max(best, w * (h.sup_l2(k, j) + I.grad_r + 0.5 * kk * kk * N * N * I.over_r));
  }
  return d + best;
}

struct DecayWeights {
  std::vector<double> theta;        // index k (theta[0] unused)
  std::vector<double> theta_tilde;  // index k
  std::vector<int> A;               // index j = 0..m; INT_MAX when eta = 0
};

inline int decay_threshold(const Params& p, int j) {
  if (p.eta <= 0.0) return INT_MAX;
  return static_cast<int>(std::floor((0.5 - p.eta - p.delta) * (p.m - j) / p.eta + 1e-12)) + 2;
}

inline DecayWeights decay_weights(const Params& p) {
  p.validate();
  DecayWeights w;
  const double N = p.N;
  w.theta.assign(static_cast<std::size_t>(p.K + 1), 0.0);
  w.theta_tilde.assign(static_cast<std::size_t>(p.K + 1), 0.0);
  for (int k = 1; k <= p.K; ++k) {
    const double kk = k;
    w.theta[static_cast<std::size_t>(k)] =
        std::pow(kk, -p.sigma * p.m) *
        std::pow(N, -std::min(p.eta * (kk - 2.0), (0.5 - p.eta - p.delta) * p.m));
    w.theta_tilde[static_cast<std::size_t>(k)] =
        std::pow(kk, -p.sigma * (p.m - 1)) *
        std::pow(N, -std::min(p.eta * (kk - 2.0), (0.5 - p.eta - p.delta) * (p.m - 1)));
  }
  for (int j = 0; j <= p.m; ++j) w.A.push_back(decay_threshold(p, j));
  return w;
}

// Predicted shape of sup_t ||d_z^j u_k|| / ||d_z^j alpha|| without the constant.
inline double decay_bound_shape(const Params& p, int k, int j, bool anisotropic) {
  const double N = p.N, kk = k;
  if (!anisotropic) return std::pow(kk, -1.0) * std::pow(N, -p.eta * (kk - 1.0) + p.delta);
  const double poly = std::pow(kk, -p.sigma * (p.m - j));
  if (k <= decay_threshold(p, j)) return poly * std::pow(N, -p.eta * (kk - 1.0) + p.delta);
  return poly * std::pow(N, -(0.5 - p.eta - p.delta) * (p.m - j) - p.eta + p.delta);
}

struct DecayRow {
  int k = 0;
  int j = 0;
  double sup_norm = 0.0;  // sup_t ||d_z^j u_k||
  double bound = 0.0;     // c * shape, c fitted on k = 1
  double ratio = 0.0;     // sup_norm / bound
};

struct DecayReport {
  bool anisotropic = false;
  std::vector<DecayRow> rows;
  double mean_ratio[2] = {0.0, 0.0};   // sup ||d_z^j u_0|| / (N^{-1/4+delta} ||d_z^j alpha||)
  double fitted_factor[2] = {0.0, 0.0};  // fitted decrease factor per unit k over k >= 2
  double target_factor = 1.0;            // N^eta
  bool rate_pass[2] = {true, true};
  bool no_cascade = false;
  double truncation_leakage = 0.0;  // sup ||u_K|| / sup ||u_1||
  double horizon = 0.0;
  int snapshots = 0;
  int K = 0;
  int N = 0;
};

// Least-squares slope of log(y) against k for the positive entries.
inline double fitted_log_slope(const std::vector<int>& k, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (!(y[i] > 0.0)) continue;
    const double x = k[i], l = std::log(y[i]);
    sx += x;
    sy += l;
    sxx += x * x;
    sxy += x * l;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline DecayReport decay_report(const EnergyHistory& h, const Params& p) {
  if (h.empty()) throw InvalidArgument("decay_report: empty history");
  DecayReport rep;
  rep.anisotropic = p.nu == 0.0;
  rep.K = h.K();
  rep.N = p.N;
  rep.horizon = h.times().back() - h.times().front();
  rep.snapshots = static_cast<int>(h.times().size());
  rep.target_factor = std::pow(static_cast<double>(p.N), p.eta);
  bool cascade = h.sup_l2(0, 0) > 0.0;
  for (int k = 2; k <= h.K(); ++k) cascade = cascade || h.sup_l2(k, 0) > 0.0;
  rep.no_cascade = !cascade;
  const double s1 = std::sqrt(h.sup_l2(1, 0));
  rep.truncation_leakage = s1 > 0.0 ? std::sqrt(h.sup_l2(h.K(), 0)) / s1 : 0.0;
  for (int j = 0; j <= 1; ++j) {
    const double an = j < static_cast<int>(h.profile_norms.size()) ? h.profile_norms[static_cast<std::size_t>(j)] : 0.0;
    const double sup1 = std::sqrt(h.sup_l2(1, j));
    const double shape1 = decay_bound_shape(p, 1, j, rep.anisotropic) * an;
    const double c = shape1 > 0.0 ? sup1 / shape1 : 0.0;
    std::vector<int> ks;
    std::vector<double> ys;
    for (int k = 1; k <= h.K(); ++k) {
      DecayRow r;
      r.k = k;
      r.j = j;
      r.sup_norm = std::sqrt(h.sup_l2(k, j));
      r.bound = c * decay_bound_shape(p, k, j, rep.anisotropic) * an;
      r.ratio = r.bound > 0.0 ? r.sup_norm / r.bound : 0.0;
      rep.rows.push_back(r);
      if (k >= 2) {
        ks.push_back(k);
        ys.push_back(r.sup_norm);
      }
    }
    const double slope = fitted_log_slope(ks, ys);
    rep.fitted_factor[j] = std::isnan(slope) ? 0.0 : std::exp(-slope);
    rep.rate_pass[j] = std::isnan(slope) || rep.fitted_factor[j] >= rep.target_factor;
    const double mean_scale = std::pow(static_cast<double>(p.N), -0.25 + p.delta) * an;
    rep.mean_ratio[j] = mean_scale > 0.0 ? std::sqrt(h.sup_l2(0, j)) / mean_scale : 0.0;
  }
  return rep;
}

// ||d_z^j alpha|| for j = 0..j_max (all six profile fields).
inline std::vector<double> profile_dz_norms(const InitProfile& a, int j_max) {
  std::vector<double> out;
  for (int j = 0; j <= j_max; ++j) {
    double s = 0.0;
    for (const auto* f : a.fields()) s += norm2(d_z(*f, j));
    out.push_back(std::sqrt(s));
  }
  return out;
}

struct SmallnessResult {
  double ns_lhs = 0.0;
  double ans_lhs1 = 0.0;
  double ans_lhs2 = 0.0;
  double eps = 0.0;
  bool ns_pass = false;
  bool ans_pass = false;
};

inline SmallnessResult smallness_check(const std::vector<double>& dz_norms, const Params& p) {
  if (static_cast<int>(dz_norms.size()) < p.m + 2)
    throw InvalidArgument("smallness_check: need ||d_z^j alpha|| for j = 0..m+1");
  const double N = p.N;
  const double a0 = dz_norms[0], a1 = dz_norms[1];
  const double geo = std::sqrt(a0) * std::sqrt(a1);
  SmallnessResult r;
  r.eps = p.small_eps;
  r.ns_lhs = (std::pow(N, -(0.25 - p.delta)) + std::pow(N, -(0.5 - p.delta - p.eta))) * geo;
  double sum = 0.0;
  for (int j = 0; j <= p.m + 1; ++j) sum += dz_norms[static_cast<std::size_t>(j)];
  r.ans_lhs1 = (std::pow(N, -(0.25 - p.delta)) + std::pow(N, -(1.0 - p.eta) / p.m)) * sum;
  r.ans_lhs2 = std::pow(N, -(0.5 - p.delta - p.eta)) * geo;
  r.ns_pass = r.ns_lhs <= p.small_eps;
  r.ans_pass = r.ans_lhs1 <= p.small_eps && r.ans_lhs2 <= p.small_eps;
  return r;
}

inline SmallnessResult smallness_check(const InitProfile& a, const Params& p) {
  return smallness_check(profile_dz_norms(a, p.m + 1), p);
}

// H_l(alpha) = N^{-4(1/4-delta)} sum_{i<=max(l,1)} ||d_z^i alpha||^4 + N^{-4(1-delta)} sum_{1<=i<=l+1} ||d_z^i alpha||^4.
inline double h_ell(const std::vector<double>& dz_norms, const Params& p, int ell) {
  if (ell < 0 || static_cast<int>(dz_norms.size()) < std::max(ell, 1) + 2)
    throw InvalidArgument("h_ell: not enough profile norms");
  const double N = p.N;
  double a = 0.0, b = 0.0;
  for (int i = 0; i <= std::max(ell, 1); ++i) a += std::pow(dz_norms[static_cast<std::size_t>(i)], 4);
  for (int i = 1; i <= ell + 1; ++i) b += std::pow(dz_norms[static_cast<std::size_t>(i)], 4);
  return std::pow(N, -4.0 * (0.25 - p.delta)) * a + std::pow(N, -4.0 * (1.0 - p.delta)) * b;
}

// Measured lhs / rhs of the Lemma 3.3 estimates.
struct Lemma33Table {
  double eq38[2] = {0.0, 0.0};     // mean mode, j = 0, 1
  std::vector<double> eq39[2];     // index k
  double eq310a = 0.0;             // mean mode
  std::vector<double> eq310b;      // index k
  std::vector<double> eq310c;      // index k
};

inline Lemma33Table lemma33_bounds(const EnergyHistory& h, const Params& p) {
  if (!h.mixed_enabled()) throw InvalidArgument("lemma33_bounds: mixed-norm accumulation disabled");
  Lemma33Table t;
  const double N = p.N;
  const double E0 = compute_E(h, 0, p), E1 = compute_E(h, 1, p);
  const double E[2] = {E0, E1};
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  const double q4 = 0.25;
  const MixedNorms& m0 = h.mixed_integral(0);
  for (int j = 0; j < 2; ++j)
    t.eq38[j] = ratio(std::pow(m0.l4h_l2v[j], q4), std::pow(N, p.eta - 0.25) * std::sqrt(E[j]));
  const double E0E1 = std::pow(E0, 0.25) * std::pow(E1, 0.25);
  t.eq310a = ratio(std::pow(m0.l4h_linf, q4) + std::sqrt(m0.grad_l2h_linf) + std::sqrt(m0.over_r_l2h_linf),
                   std::pow(N, p.eta - 0.25) * E0E1);
  for (auto& v : t.eq39) v.assign(static_cast<std::size_t>(h.K() + 1), 0.0);
  t.eq310b.assign(static_cast<std::size_t>(h.K() + 1), 0.0);
  t.eq310c.assign(static_cast<std::size_t>(h.K() + 1), 0.0);
  for (int k = 1; k <= h.K(); ++k) {
    const MixedNorms& m = h.mixed_integral(k);
    const double kk = k;
    const double s39 = std::pow(kk, -1.25) * std::pow(N, p.eta * (2.0 - kk) - 0.25);
    const auto ik = static_cast<std::size_t>(k);
    for (int j = 0; j < 2; ++j) t.eq39[j][ik] = ratio(std::pow(m.l4h_l2v[j], q4), s39 * std::sqrt(E[j]));
    t.eq310b[ik] = ratio(std::pow(m.l4h_linf, q4), s39 * E0E1);
    t.eq310c[ik] = ratio(std::sqrt(m.grad_l2h_linf) + kk * N * std::sqrt(m.over_r_l2h_linf),
                         std::pow(kk, -1.0) * std::pow(N, p.eta * (2.0 - kk)) * E0E1);
  }
  return t;
}

}  // namespace cylmode
