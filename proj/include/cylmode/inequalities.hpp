#pragma once

// Empirical constants of the anisotropic Sobolev inequalities on the unit disk
// and of the vertical interpolation inequality.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <string>
#include <vector>

#include "cylmode/errors.hpp"
#include "cylmode/grid.hpp"
#include "cylmode/parallel.hpp"

namespace cylmode {

// Gauss-Legendre nodes and weights on [0, 1] (Golub-Welsch).
inline void gauss_legendre01(int n, Eigen::VectorXd& x, Eigen::VectorXd& w) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = i / std::sqrt(4.0 * i * i - 1.0);
    J(i, i - 1) = J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  x = (es.eigenvalues().array() + 1.0) * 0.5;
  w = es.eigenvectors().row(0).transpose().array().square();  // sums to 1 on [0, 1]
}

// Tensor (r, theta) grid on the unit disk, independent of the solver grid.
class DiskGrid {
 public:
  DiskGrid(int n_r, int n_theta) : n_r_(n_r), n_theta_(n_theta) {
    if (n_r < 4) throw InvalidArgument("DiskGrid: n_r must be >= 4");
    if (n_theta < 4 || n_theta % 2) throw InvalidArgument("DiskGrid: n_theta must be even and >= 4");
    gauss_legendre01(n_r, r_, wr_);
  }
  int n_r() const { return n_r_; }
  int n_theta() const { return n_theta_; }
  const Eigen::VectorXd& r() const { return r_; }
  // weights for int_0^1 h(r) dr
  const Eigen::VectorXd& wr() const { return wr_; }
  double theta(int j) const { return 2.0 * kPi * j / n_theta_; }
  double dtheta() const { return 2.0 * kPi / n_theta_; }

 private:
  int n_r_, n_theta_;
  Eigen::VectorXd r_, wr_;
};

// g(r) trig(n theta) pieces; g is a polynomial in r given by its power coefficients.
struct TrigTerm {
  std::vector<double> g;  // g(r) = sum_i g[i] r^i
  int n = 0;
  double a_cos = 1.0;
  double a_sin = 0.0;
};

struct TestFunction2D {
  std::vector<TrigTerm> terms;

  bool radial() const {
    for (const auto& t : terms)
      if (t.n != 0 || t.a_sin != 0.0) return false;
    return true;
  }
  TestFunction2D scaled(double lambda) const {
    TestFunction2D f = *this;
    for (auto& t : f.terms)
      for (auto& c : t.g) c *= lambda;
    return f;
  }
};

namespace detail {
inline double poly(const std::vector<double>& c, double r) {
  double s = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * r + *it;
  return s;
}
inline double dpoly(const std::vector<double>& c, double r) {
  double s = 0.0;
  for (std::size_t i = c.size(); i-- > 1;) s = s * r + static_cast<double>(i) * c[i];
  return s;
}
inline std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> c(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
  return c;
}
}  // namespace detail

// Samples of f, d_r f and d_theta f on a disk grid (rows r, columns theta).
struct DiskSamples {
  Eigen::MatrixXd f, fr, fth;
};

// d_theta by FFT along each row.
inline Eigen::MatrixXd d_theta(const Eigen::MatrixXd& f) {
  const int nt = static_cast<int>(f.cols());
  Eigen::FFT<double> fft;
  Eigen::MatrixXd out(f.rows(), nt);
  std::vector<double> row(static_cast<std::size_t>(nt));
  std::vector<std::complex<double>> spec;
  for (int i = 0; i < f.rows(); ++i) {
    for (int j = 0; j < nt; ++j) row[static_cast<std::size_t>(j)] = f(i, j);
    fft.fwd(spec, row);
    for (int m = 0; m < nt; ++m) {
      const int w = m <= nt / 2 ? m : m - nt;
      spec[static_cast<std::size_t>(m)] *= (2 * m == nt) ? std::complex<double>(0.0) : std::complex<double>(0.0, w);
    }
    fft.inv(row, spec);
    for (int j = 0; j < nt; ++j) out(i, j) = row[static_cast<std::size_t>(j)];
  }
  return out;
}

inline DiskSamples sample(const TestFunction2D& f, const DiskGrid& g) {
  DiskSamples s{Eigen::MatrixXd::Zero(g.n_r(), g.n_theta()), Eigen::MatrixXd::Zero(g.n_r(), g.n_theta()), {}};
  for (const auto& t : f.terms) {
    for (int i = 0; i < g.n_r(); ++i) {
      const double r = g.r()(i);
      const double gv = detail::poly(t.g, r), dg = detail::dpoly(t.g, r);
      for (int j = 0; j < g.n_theta(); ++j) {
        const double th = t.n * g.theta(j);
        const double tr = t.a_cos * std::cos(th) + t.a_sin * std::sin(th);
        s.f(i, j) += gv * tr;
        s.fr(i, j) += dg * tr;
      }
    }
  }
  s.fth = d_theta(s.f);
  return s;
}

inline double boundary_value(const TestFunction2D& f) {
  double b = 0.0;
  for (const auto& t : f.terms) b += std::abs(detail::poly(t.g, 1.0)) * (std::abs(t.a_cos) + std::abs(t.a_sin));
  return b;
}

namespace detail {
// int over the disk of h, h sampled on the grid
inline double disk_integral(const Eigen::MatrixXd& h, const DiskGrid& g) {
  return g.dtheta() * (g.wr().array() * g.r().array() * h.rowwise().sum().array()).sum();
}
inline double lp(const Eigen::MatrixXd& f, const DiskGrid& g, double p) {
  return std::pow(disk_integral(f.array().abs().pow(p).matrix(), g), 1.0 / p);
}
inline double l2(const Eigen::MatrixXd& f, const DiskGrid& g) {
  return std::sqrt(disk_integral(f.array().square().matrix(), g));
}
inline Eigen::MatrixXd over_r(const Eigen::MatrixXd& f, const DiskGrid& g) {
  return (g.r().array().inverse().matrix().asDiagonal() * f);
}
inline double scale_of(const Eigen::MatrixXd& f) { return f.cwiseAbs().maxCoeff(); }

inline void check_boundary(const TestFunction2D& f) {
  double s = 0.0;
  for (const auto& t : f.terms)
    for (double c : t.g) s += std::abs(c) * (std::abs(t.a_cos) + std::abs(t.a_sin));
  if (boundary_value(f) > 1e-12 * std::max(1.0, s))
    throw DomainError("test function does not vanish at r = 1");
}
inline void check_zero_theta_mean(const DiskSamples& s) {
  const double scale = scale_of(s.f);
  const Eigen::VectorXd mean = s.f.rowwise().mean();
  if (mean.cwiseAbs().maxCoeff() > 1e-12 * scale) throw DomainError("theta mean of the test function is nonzero");
}
inline double safe_ratio(double num, double den) { return num == 0.0 ? 0.0 : num / den; }
}  // namespace detail

// ||f||_{Lp} / (||f||^{2/p} ||grad_h f||^{1-2/p})
inline double ratio_isotropic(const TestFunction2D& f, double p, const DiskGrid& g) {
  if (!(p >= 2.0) || !std::isfinite(p)) throw InvalidArgument("ratio_isotropic: need 2 <= p < inf");
  detail::check_boundary(f);
  const DiskSamples s = sample(f, g);
  const double n2 = detail::l2(s.f, g);
  if (n2 == 0.0) return 0.0;
  if (p == 2.0) return 1.0;
  const Eigen::MatrixXd fth_r = detail::over_r(s.fth, g);
  const double grad = std::sqrt(detail::disk_integral((s.fr.array().square() + fth_r.array().square()).matrix(), g));
  return detail::lp(s.f, g, p) / (std::pow(n2, 2.0 / p) * std::pow(grad, 1.0 - 2.0 / p));
}

// Anisotropic polar form: ||f||^{2/p} (||d_r f||^s + ||d_th f / r||^s) ||d_th f / r||^s, s = 1/2 - 1/p
inline double ratio_lemma31(const TestFunction2D& f, double p, const DiskGrid& g) {
  if (!(p >= 2.0 && p <= 6.0)) throw InvalidArgument("ratio_lemma31: need 2 <= p <= 6");
  detail::check_boundary(f);
  const DiskSamples s = sample(f, g);
  detail::check_zero_theta_mean(s);
  const double n2 = detail::l2(s.f, g);
  if (n2 == 0.0) return 0.0;
  if (p == 2.0) return 1.0;
  const double e = 0.5 - 1.0 / p;
  const double a = detail::l2(s.fr, g), b = detail::l2(detail::over_r(s.fth, g), g);
  return detail::lp(s.f, g, p) / (std::pow(n2, 2.0 / p) * (std::pow(a, e) + std::pow(b, e)) * std::pow(b, e));
}

// ||f / r|| / ||d_th f / r||, at most 2 pi for zero-theta-mean f.
inline double ratio_poincare(const TestFunction2D& f, const DiskGrid& g) {
  detail::check_boundary(f);
  const DiskSamples s = sample(f, g);
  detail::check_zero_theta_mean(s);
  return detail::safe_ratio(detail::l2(detail::over_r(s.f, g), g), detail::l2(detail::over_r(s.fth, g), g));
}

namespace detail {
struct RadialNorms {
  double lp = 0.0, l2 = 0.0, dr = 0.0, over_r = 0.0;
};
inline RadialNorms radial_norms(const TestFunction2D& f, double p, const DiskGrid& g) {
  if (!f.radial()) throw DomainError("radial test function required");
  check_boundary(f);
  RadialNorms n;
  double sp = 0.0, s2 = 0.0, sd = 0.0, so = 0.0;
  for (int i = 0; i < g.n_r(); ++i) {
    const double r = g.r()(i), w = g.wr()(i);
    double v = 0.0, dv = 0.0;
    for (const auto& t : f.terms) {
      v += t.a_cos * poly(t.g, r);
      dv += t.a_cos * dpoly(t.g, r);
    }
    sp += w * r * std::pow(std::abs(v), p);
    s2 += w * r * v * v;
    sd += w * r * dv * dv;
    so += w * v * v / r;
  }
  const double tm = 2.0 * kPi;
  n.lp = std::pow(tm * sp, 1.0 / p);
  n.l2 = std::sqrt(tm * s2);
  n.dr = std::sqrt(tm * sd);
  n.over_r = std::sqrt(tm * so);
  return n;
}
inline double radial_value_at_axis(const TestFunction2D& f) {
  double v = 0.0;
  for (const auto& t : f.terms) v += t.a_cos * (t.g.empty() ? 0.0 : t.g[0]);
  return v;
}
inline double radial_ratio(const TestFunction2D& f, double p, const DiskGrid& g) {
  const RadialNorms n = radial_norms(f, p, g);
  if (n.l2 == 0.0) return 0.0;
  if (p == 2.0) return 1.0;
  // g(0) != 0 makes ||g / r|| infinite
  if (radial_value_at_axis(f) != 0.0) return 0.0;
  const double e = 0.5 - 1.0 / p;
  return n.lp / (std::pow(n.l2, 2.0 / p) * (std::pow(n.dr, e) + std::pow(n.over_r, e)) * std::pow(n.over_r, e));
}
}  // namespace detail

inline double ratio_cor36(const TestFunction2D& g, const DiskGrid& grid) { return detail::radial_ratio(g, 4.0, grid); }

inline double ratio_lemma32(const TestFunction2D& g, double p, const DiskGrid& grid) {
  if (!(p >= 2.0) || !std::isfinite(p)) throw InvalidArgument("ratio_lemma32: need 2 <= p < inf");
  return detail::radial_ratio(g, p, grid);
}

// ratio_lemma31(g cos th, 4) = kCor36Factor * ratio_cor36(g)
inline const double kCor36Factor = std::pow(3.0 / 8.0, 0.25) * std::sqrt(2.0);

// sup_r ||f||_{Linf_v} / (||f||_{L2_v}^{1/2} ||d_z f||_{L2_v}^{1/2}), periodic zero-mean surrogate.
inline double ratio_vertical_interp(const ScalarField& f, bool enforce_zero_mean = true) {
  const auto& g = *f.grid_ptr();
  const Array2D& v = f.values();
  const Array2D dz = d_z(f).values();
  const double scale = v.abs().maxCoeff();
  double best = 0.0;
  for (int i = 0; i < g.n_r(); ++i) {
    const double mean = v.row(i).mean();
    if (enforce_zero_mean && std::abs(mean) > 1e-12 * std::max(scale, 1e-300))
      throw DomainError("ratio_vertical_interp: nonzero z-mean");
    const double linf = v.row(i).abs().maxCoeff();
    if (linf == 0.0) continue;
    const double h = g.L_z() / g.n_z();
    const double a = std::sqrt(h * v.row(i).square().sum());
    const double b = std::sqrt(h * dz.row(i).square().sum());
    best = std::max(best, linf / std::sqrt(a * b));
  }
  return best;
}

enum class InequalityCheck { isotropic, lemma31, cor36, lemma32, vertical_interp };

inline std::string to_string(InequalityCheck c) {
  switch (c) {
    case InequalityCheck::isotropic: return "isotropic";
    case InequalityCheck::lemma31: return "lemma31";
    case InequalityCheck::cor36: return "cor36";
    case InequalityCheck::lemma32: return "lemma32";
    case InequalityCheck::vertical_interp: return "vertical_interp";
  }
  return "?";
}

inline InequalityCheck inequality_check_from_string(const std::string& s) {
  for (auto c : {InequalityCheck::isotropic, InequalityCheck::lemma31, InequalityCheck::cor36,
                 InequalityCheck::lemma32, InequalityCheck::vertical_interp})
    if (to_string(c) == s) return c;
  throw InvalidArgument("unknown inequality check: " + s);
}

struct ScanSpec {
  InequalityCheck check = InequalityCheck::lemma31;
  double p = 4.0;
  int trials = 100;
  unsigned long long seed = 1;
  int n_r = 32;
  int n_theta = 64;
  int n_z = 32;
  int max_degree = 12;  // radial polynomial degree
  int max_mode = 8;     // trig / z mode
  bool zero_family = false;

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (trials < 1) out.push_back("scan.trials must be >= 1");
    if (n_r < 4) out.push_back("scan.n_r must be >= 4");
    if (n_theta < 4 || n_theta % 2) out.push_back("scan.n_theta must be even and >= 4");
    if (n_z < 4 || n_z % 2) out.push_back("scan.n_z must be even and >= 4");
    if (max_degree < 0 || max_degree > 12) out.push_back("scan.max_degree must be in [0, 12]");
    if (max_mode < 1 || max_mode > 8) out.push_back("scan.max_mode must be in [1, 8]");
    if (!(p >= 2.0)) out.push_back("scan.p must be >= 2");
    if (check == InequalityCheck::lemma31 && p > 6.0) out.push_back("scan.p must be <= 6 for lemma31");
    return out;
  }
  void validate() const {
    const auto pr = problems();
    if (!pr.empty()) throw InvalidArgument(pr.front());
  }
};

struct ScanReport {
  std::string check;
  double p = 0.0;
  int trials = 0;
  unsigned long long seed = 0;
  double max_ratio = 0.0;
  double median_ratio = 0.0;
  double max_ratio_fine = 0.0;
  double median_ratio_fine = 0.0;
  double refinement_delta = 0.0;  // |max_fine - max| / max
  double poincare_max = 0.0;      // lemma31 only
  long pointwise_violations = 0;  // nodes with |f| > |f / r|
  bool periodic_surrogate = false;
};

// Per-trial random test functions.
inline std::mt19937_64 trial_rng(unsigned long long seed, int trial) {
  std::seed_seq ss{static_cast<unsigned>(seed & 0xffffffffu), static_cast<unsigned>(seed >> 32),
                   static_cast<unsigned>(trial)};
  return std::mt19937_64(ss);
}

inline double log_uniform_amplitude(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  return std::pow(10.0, u(rng));
}

// r^n (1 - r^2) p(r) trig(n theta), n >= n_min.
inline TestFunction2D random_disk_function(std::mt19937_64& rng, int n_min, int max_mode, int max_degree) {
  std::uniform_int_distribution<int> nterms(1, 3), mode(n_min, max_mode), deg(0, max_degree);
  std::normal_distribution<double> gauss;
  TestFunction2D f;
  const double amp = log_uniform_amplitude(rng);
  const int nt = nterms(rng);
  for (int t = 0; t < nt; ++t) {
    TrigTerm term;
    term.n = mode(rng);
    std::vector<double> base(static_cast<std::size_t>(term.n + 1), 0.0);
    base.back() = 1.0;
    std::vector<double> p(static_cast<std::size_t>(deg(rng) + 1));
    for (auto& c : p) c = gauss(rng);
    term.g = detail::poly_mul(detail::poly_mul(base, {1.0, 0.0, -1.0}), p);
    for (auto& c : term.g) c *= amp;
    term.a_cos = gauss(rng);
    term.a_sin = term.n == 0 ? 0.0 : gauss(rng);
    f.terms.push_back(term);
  }
  return f;
}

// r (1 - r) p(r): radial, zero on the axis and at r = 1.
inline TestFunction2D random_radial_function(std::mt19937_64& rng, int max_degree) {
  std::uniform_int_distribution<int> deg(0, max_degree);
  std::normal_distribution<double> gauss;
  std::vector<double> p(static_cast<std::size_t>(deg(rng) + 1));
  for (auto& c : p) c = gauss(rng);
  TrigTerm t;
  t.g = detail::poly_mul({0.0, 1.0, -1.0}, p);
  const double amp = log_uniform_amplitude(rng);
  for (auto& c : t.g) c *= amp;
  return TestFunction2D{{t}};
}

inline ScalarField random_vertical_function(std::mt19937_64& rng, const GridPtr& g, int max_mode) {
  std::uniform_int_distribution<int> nterms(1, 3), mode(1, max_mode);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  const double amp = log_uniform_amplitude(rng);
  const int nt = nterms(rng);
  std::vector<std::array<double, 3>> terms;
  for (int t = 0; t < nt; ++t) terms.push_back({static_cast<double>(mode(rng)), gauss(rng), phase(rng)});
  const double rad = gauss(rng);
  const double kz = 2.0 * kPi / g->L_z();
  return ScalarField::from_function(g, [&](double r, double z) {
    double s = 0.0;
    for (const auto& t : terms) s += t[1] * std::sin(t[0] * kz * z + t[2]);
    return amp * (1.0 + rad * r) * (1.0 - r * r) * s;
  });
}

namespace detail {
inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline long pointwise_violations(const TestFunction2D& f, const DiskGrid& g) {
  const DiskSamples s = sample(f, g);
  long bad = 0;
  for (int i = 0; i < g.n_r(); ++i)
    for (int j = 0; j < g.n_theta(); ++j)
      if (std::abs(s.f(i, j)) > std::abs(s.f(i, j) / g.r()(i))) ++bad;
  return bad;
}
}  // namespace detail

inline ScanReport constant_scan(const ScanSpec& spec) {
  spec.validate();
  ScanReport rep;
  rep.check = to_string(spec.check);
  rep.p = spec.check == InequalityCheck::cor36 ? 4.0 : spec.p;
  rep.trials = spec.trials;
  rep.seed = spec.seed;
  rep.periodic_surrogate = spec.check == InequalityCheck::vertical_interp;
  const auto T = static_cast<std::size_t>(spec.trials);
  std::vector<double> coarse(T, 0.0), fine(T, 0.0), poinc(T, 0.0);
  std::vector<long> bad(T, 0);
  const DiskGrid g1(spec.n_r, spec.n_theta), g2(2 * spec.n_r, 2 * spec.n_theta);
  GridPtr z1, z2;
  if (spec.check == InequalityCheck::vertical_interp) {
    z1 = CylGrid::build(spec.n_r, spec.n_z);
    z2 = CylGrid::build(2 * spec.n_r, 2 * spec.n_z);
  }
  parallel_for(T, [&](std::size_t i) {
    if (spec.zero_family) return;
    auto rng = trial_rng(spec.seed, static_cast<int>(i));
    switch (spec.check) {
      case InequalityCheck::isotropic:
      case InequalityCheck::lemma31: {
        const int n_min = spec.check == InequalityCheck::lemma31 ? 1 : 0;
        const TestFunction2D f = random_disk_function(rng, n_min, spec.max_mode, spec.max_degree);
        if (spec.check == InequalityCheck::lemma31) {
          coarse[i] = ratio_lemma31(f, spec.p, g1);
          fine[i] = ratio_lemma31(f, spec.p, g2);
          poinc[i] = ratio_poincare(f, g1);
        } else {
          coarse[i] = ratio_isotropic(f, spec.p, g1);
          fine[i] = ratio_isotropic(f, spec.p, g2);
        }
        bad[i] = detail::pointwise_violations(f, g1);
        break;
      }
      case InequalityCheck::cor36:
      case InequalityCheck::lemma32: {
        const TestFunction2D f = random_radial_function(rng, spec.max_degree);
        const double p = spec.check == InequalityCheck::cor36 ? 4.0 : spec.p;
        coarse[i] = ratio_lemma32(f, p, g1);
        fine[i] = ratio_lemma32(f, p, g2);
        bad[i] = detail::pointwise_violations(f, g1);
        break;
      }
      case InequalityCheck::vertical_interp: {
        auto rng2 = rng;
        coarse[i] = ratio_vertical_interp(random_vertical_function(rng, z1, spec.max_mode));
        fine[i] = ratio_vertical_interp(random_vertical_function(rng2, z2, spec.max_mode));
        break;
      }
    }
  });
  rep.max_ratio = *std::max_element(coarse.begin(), coarse.end());
  rep.max_ratio_fine = *std::max_element(fine.begin(), fine.end());
  rep.median_ratio = detail::median(coarse);
  rep.median_ratio_fine = detail::median(fine);
  rep.refinement_delta = rep.max_ratio > 0.0 ? std::abs(rep.max_ratio_fine - rep.max_ratio) / rep.max_ratio : 0.0;
  rep.poincare_max = *std::max_element(poinc.begin(), poinc.end());
  for (long b : bad) rep.pointwise_violations += b;
  return rep;
}

}  // namespace cylmode
