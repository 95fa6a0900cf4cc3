#pragma once

// Meridional (r, z) discretization of the unit cylinder: radial collocation
// nodes in (0, 1], a uniform periodic z grid, differentiation operators and
// quadrature for the measure r dr dz.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "cylmode/errors.hpp"

namespace cylmode {

using Array2D = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CArray2D =
    Eigen::Array<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Measure of the full circle: an axisymmetric coefficient field f(r, z) is
// normed as the function f on the cylinder, so every (r, z) integral picks up
// this factor.
inline constexpr double kThetaMeasure = 2.0 * kPi;
// Integral of cos^2(kN theta) (or sin^2) over one turn. A single mode
// f(r,z) cos(kN theta) has Omega-norm^2 = kModeThetaFactor * int f^2 r dr dz,
// i.e. half of the axisymmetric convention above.
inline constexpr double kModeThetaFactor = kPi;

enum class RadialScheme { chebyshev_gauss_lobatto_mapped, uniform_fd2 };

inline std::string to_string(RadialScheme s) {
  return s == RadialScheme::chebyshev_gauss_lobatto_mapped ? "chebyshev" : "uniform_fd2";
}

inline RadialScheme radial_scheme_from_string(const std::string& s) {
  if (s == "chebyshev" || s == "chebyshev_gauss_lobatto_mapped")
    return RadialScheme::chebyshev_gauss_lobatto_mapped;
  if (s == "uniform_fd2" || s == "fd2") return RadialScheme::uniform_fd2;
  throw InvalidArgument("unknown radial scheme '" + s + "'");
}

namespace detail {

// Clenshaw-Curtis weights on x_j = cos(pi j / n), j = 0..n, for int_{-1}^{1}.
inline Eigen::VectorXd clenshaw_curtis_weights(int n) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n + 1);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n - 1);
  const auto nn = static_cast<double>(n);
  if (n % 2 == 0) {
    w(0) = w(n) = 1.0 / (nn * nn - 1.0);
    for (int k = 1; k < n / 2; ++k)
      for (int j = 1; j < n; ++j)
        v(j - 1) -= 2.0 * std::cos(2.0 * k * kPi * j / nn) / (4.0 * k * k - 1.0);
    for (int j = 1; j < n; ++j) v(j - 1) -= std::cos(nn * kPi * j / nn) / (nn * nn - 1.0);
  } else {
    w(0) = w(n) = 1.0 / (nn * nn);
    for (int k = 1; k <= (n - 1) / 2; ++k)
      for (int j = 1; j < n; ++j)
        v(j - 1) -= 2.0 * std::cos(2.0 * k * kPi * j / nn) / (4.0 * k * k - 1.0);
  }
  for (int j = 1; j < n; ++j) w(j) = 2.0 * v(j - 1) / nn;
  return w;
}

// Barycentric differentiation matrix for the given nodes and weights.
inline Eigen::MatrixXd barycentric_diff(const Eigen::VectorXd& x, const Eigen::VectorXd& lambda) {
  const auto n = x.size();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double diag = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      d(i, j) = (lambda(j) / lambda(i)) / (x(i) - x(j));
      diag -= d(i, j);
    }
    d(i, i) = diag;
  }
  return d;
}

}  // namespace detail

class CylGrid {
 public:
  // build_grid: n_r >= 4, n_z >= 4 and even, L_z > 0.
  static std::shared_ptr<const CylGrid> build(int n_r, int n_z, double L_z = 2.0 * kPi,
                                              RadialScheme scheme =
                                                  RadialScheme::chebyshev_gauss_lobatto_mapped) {
    if (n_r < 4) throw InvalidArgument("build_grid: n_r must be >= 4, got " + std::to_string(n_r));
    if (n_z < 4 || n_z % 2 != 0)
      throw InvalidArgument("build_grid: n_z must be even and >= 4, got " + std::to_string(n_z));
    if (!(L_z > 0.0) || !std::isfinite(L_z)) throw InvalidArgument("build_grid: L_z must be > 0");
    return std::shared_ptr<const CylGrid>(new CylGrid(n_r, n_z, L_z, scheme));
  }

  int n_r() const { return n_r_; }
  int n_z() const { return n_z_; }
  double L_z() const { return L_z_; }
  RadialScheme scheme() const { return scheme_; }

  // Radial nodes, strictly increasing, last = 1.
  const Eigen::VectorXd& r() const { return r_; }
  const Eigen::VectorXd& inv_r() const { return inv_r_; }
  const Eigen::VectorXd& z() const { return z_; }
  // Radial weights: sum_i w_i f(r_i) ~ int_0^1 f r dr.
  const Eigen::VectorXd& radial_weights() const { return rad_w_; }
  double z_weight() const { return L_z_ / n_z_; }
  // Full weights for int int f r dr dz, shape (n_r, n_z).
  const Array2D& quad_w() const { return quad_w_; }
  // Radial differentiation matrix (n_r x n_r).
  const Eigen::MatrixXd& diff_r() const { return d_r_; }

  // Number of stored z wavenumbers (real-to-half-complex transform).
  int n_zmodes() const { return n_z_ / 2 + 1; }
  // Wavenumber used for d/dz of z-mode q; the Nyquist mode is differentiated to zero.
  double beta(int q) const { return q == n_z_ / 2 ? 0.0 : 2.0 * kPi * q / L_z_; }

  // Weights c_j with f(r) ~ sum_j c_j f(r_j): barycentric polynomial
  // interpolation for the Chebyshev scheme, piecewise linear for FD.
  Eigen::VectorXd radial_interp_weights(double r) const {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n_r_);
    if (scheme_ == RadialScheme::chebyshev_gauss_lobatto_mapped) {
      for (int j = 0; j < n_r_; ++j)
        if (r == r_(j)) {
          c(j) = 1.0;
          return c;
        }
      for (int j = 0; j < n_r_; ++j) c(j) = lambda_(j) / (r - r_(j));
      return c / c.sum();
    }
    int j = 0;
    while (j + 2 < n_r_ && r > r_(j + 1)) ++j;
    const double t = (r - r_(j)) / (r_(j + 1) - r_(j));
    c(j) = 1.0 - t;
    c(j + 1) = t;
    return c;
  }

  // Trigonometric interpolation weights in z: f(z) ~ sum_l c_l f(z_l).
  Eigen::VectorXd z_interp_weights(double z) const {
    Eigen::VectorXd c(n_z_);
    const int h = n_z_ / 2;
    for (int l = 0; l < n_z_; ++l) {
      const double s = 2.0 * kPi * (z - z_(l)) / L_z_;
      double v = 1.0;
      for (int q = 1; q < h; ++q) v += 2.0 * std::cos(q * s);
      v += std::cos(h * s);
      c(l) = v / n_z_;
    }
    return c;
  }

  bool same_shape(const CylGrid& o) const {
    return n_r_ == o.n_r_ && n_z_ == o.n_z_ && L_z_ == o.L_z_ && scheme_ == o.scheme_;
  }

  // Forward transform along z of each radial row: (n_r, n_z) -> (n_r, n_z/2+1).
  CArray2D fft_z(const Array2D& f) const {
    CArray2D out(n_r_, n_zmodes());
    std::vector<double> in(static_cast<std::size_t>(n_z_));
    std::vector<std::complex<double>> spec;
    for (int i = 0; i < n_r_; ++i) {
      for (int l = 0; l < n_z_; ++l) in[static_cast<std::size_t>(l)] = f(i, l);
      fft().fwd(spec, in);
      for (int q = 0; q < n_zmodes(); ++q) out(i, q) = spec[static_cast<std::size_t>(q)];
    }
    return out;
  }

  Array2D ifft_z(const CArray2D& s) const {
    Array2D out(n_r_, n_z_);
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(n_zmodes()));
    std::vector<double> o;
    for (int i = 0; i < n_r_; ++i) {
      for (int q = 0; q < n_zmodes(); ++q) spec[static_cast<std::size_t>(q)] = s(i, q);
      // The half-spectrum inverse assumes real DC and Nyquist bins.
      spec[0] = spec[0].real();
      spec.back() = spec.back().real();
      fft().inv(o, spec, n_z_);
      for (int l = 0; l < n_z_; ++l) out(i, l) = o[static_cast<std::size_t>(l)];
    }
    return out;
  }

 private:
  // kissfft caches twiddles inside the object, so each thread keeps its own.
  static Eigen::FFT<double>& fft() {
    thread_local Eigen::FFT<double> f = [] {
      Eigen::FFT<double> e;
      e.SetFlag(Eigen::FFT<double>::HalfSpectrum);
      return e;
    }();
    return f;
  }

  CylGrid(int n_r, int n_z, double L_z, RadialScheme scheme)
      : n_r_(n_r), n_z_(n_z), L_z_(L_z), scheme_(scheme) {
    r_.resize(n_r);
    rad_w_.resize(n_r);
    if (scheme == RadialScheme::chebyshev_gauss_lobatto_mapped) {
      // x_j = cos(pi j / n_r), j = 0..n_r, mapped by r = (1 + x) / 2; the
      // node j = n_r (r = 0) is dropped. Stored with r increasing.
      const Eigen::VectorXd cc = detail::clenshaw_curtis_weights(n_r);
      Eigen::VectorXd lambda(n_r);
      for (int i = 0; i < n_r; ++i) {
        const int j = n_r - 1 - i;
        const double s = std::sin(kPi * j / (2.0 * n_r));
        r_(i) = (j == 0) ? 1.0 : 1.0 - s * s;
        // int_0^1 f r dr = 1/2 int_{-1}^{1} (f r) dx; the dropped node carries r = 0.
        rad_w_(i) = 0.5 * cc(j) * r_(i);
        // Chebyshev-Lobatto barycentric weights with node x = -1 removed.
        const double delta = (j == 0) ? 0.5 : 1.0;
        lambda(i) = ((j % 2 == 0) ? 1.0 : -1.0) * delta * r_(i);
      }
      d_r_ = detail::barycentric_diff(r_, lambda);
      lambda_ = lambda;
    } else {
      const double h = 1.0 / n_r;
      for (int i = 0; i < n_r; ++i) {
        r_(i) = (i + 1 == n_r) ? 1.0 : (i + 1) * h;
        rad_w_(i) = (i + 1 == n_r) ? 0.5 * h : h * r_(i);
      }
      d_r_ = Eigen::MatrixXd::Zero(n_r, n_r);
      d_r_(0, 0) = -3.0 / (2.0 * h);
      d_r_(0, 1) = 4.0 / (2.0 * h);
      d_r_(0, 2) = -1.0 / (2.0 * h);
      for (int i = 1; i + 1 < n_r; ++i) {
        d_r_(i, i - 1) = -1.0 / (2.0 * h);
        d_r_(i, i + 1) = 1.0 / (2.0 * h);
      }
      d_r_(n_r - 1, n_r - 1) = 3.0 / (2.0 * h);
      d_r_(n_r - 1, n_r - 2) = -4.0 / (2.0 * h);
      d_r_(n_r - 1, n_r - 3) = 1.0 / (2.0 * h);
    }
    inv_r_ = r_.cwiseInverse();
    z_.resize(n_z);
    for (int l = 0; l < n_z; ++l) z_(l) = l * L_z / n_z;
    quad_w_ = (rad_w_ * z_weight()).replicate(1, n_z).array();
  }

  int n_r_;
  int n_z_;
  double L_z_;
  RadialScheme scheme_;
  Eigen::VectorXd r_, inv_r_, z_, rad_w_, lambda_;
  Array2D quad_w_;
  Eigen::MatrixXd d_r_;
};

using GridPtr = std::shared_ptr<const CylGrid>;

// A real field sampled on the (r, z) nodes, stored row-major (n_r, n_z).
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(GridPtr grid)
      : grid_(std::move(grid)), values_(Array2D::Zero(grid_->n_r(), grid_->n_z())) {}
  ScalarField(GridPtr grid, Array2D values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.rows() != grid_->n_r() || values_.cols() != grid_->n_z())
      throw InvalidArgument("ScalarField: value shape does not match grid");
  }

  template <typename Fn>
  static ScalarField from_function(const GridPtr& grid, Fn&& fn) {
    ScalarField f(grid);
    for (int i = 0; i < grid->n_r(); ++i)
      for (int l = 0; l < grid->n_z(); ++l) f.values_(i, l) = fn(grid->r()(i), grid->z()(l));
    return f;
  }

  bool empty() const { return !grid_; }
  const CylGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  Array2D& values() { return values_; }
  const Array2D& values() const { return values_; }
  double operator()(int i, int l) const { return values_(i, l); }
  double& operator()(int i, int l) { return values_(i, l); }

  void check_compatible(const ScalarField& o) const {
    if (!grid_ || !o.grid_) throw InvalidArgument("ScalarField: uninitialized field");
    if (grid_ != o.grid_ && !grid_->same_shape(*o.grid_))
      throw InvalidArgument("ScalarField: grid mismatch");
  }

  ScalarField& operator+=(const ScalarField& o) {
    check_compatible(o);
    values_ += o.values_;
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    check_compatible(o);
    values_ -= o.values_;
    return *this;
  }
  ScalarField& operator*=(double s) {
    values_ *= s;
    return *this;
  }
  ScalarField operator-() const { return {grid_, -values_}; }

  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
  friend ScalarField operator*(const ScalarField& a, const ScalarField& b) {
    a.check_compatible(b);
    return {a.grid_, a.values_ * b.values_};
  }
  friend ScalarField operator*(double s, ScalarField a) { return a *= s; }
  friend ScalarField operator*(ScalarField a, double s) { return a *= s; }

  double max_abs() const { return values_.size() ? values_.abs().maxCoeff() : 0.0; }

 private:
  GridPtr grid_;
  Array2D values_;
};

// Value of f at an arbitrary point (r, z) of the meridional domain.
inline double interpolate(const ScalarField& f, double r, double z) {
  const CylGrid& g = f.grid();
  return g.radial_interp_weights(r).dot(f.values().matrix() * g.z_interp_weights(z));
}

// f / r, node-wise (r > 0 at every node).
inline ScalarField over_r(const ScalarField& f) {
  return {f.grid_ptr(), f.values().colwise() * f.grid().inv_r().array()};
}

inline ScalarField times_r(const ScalarField& f) {
  return {f.grid_ptr(), f.values().colwise() * f.grid().r().array()};
}

inline ScalarField d_r(const ScalarField& f) {
  Array2D out = (f.grid().diff_r() * f.values().matrix()).array();
  return {f.grid_ptr(), std::move(out)};
}

inline ScalarField d_z(const ScalarField& f) {
  const CylGrid& g = f.grid();
  CArray2D s = g.fft_z(f.values());
  for (int q = 0; q < g.n_zmodes(); ++q) s.col(q) *= std::complex<double>(0.0, g.beta(q));
  return {f.grid_ptr(), g.ifft_z(s)};
}

// j-th z derivative.
inline ScalarField d_z(const ScalarField& f, int j) {
  if (j < 0) throw InvalidArgument("d_z: negative derivative order");
  if (j == 0) return f;
  const CylGrid& g = f.grid();
  CArray2D s = g.fft_z(f.values());
  for (int q = 0; q < g.n_zmodes(); ++q) s.col(q) *= std::pow(std::complex<double>(0.0, g.beta(q)), j);
  return {f.grid_ptr(), g.ifft_z(s)};
}

// Quadrature approximation of int_0^1 int_0^{L_z} f r dr dz.
inline double integrate(const ScalarField& f) {
  return (f.grid().quad_w() * f.values()).sum();
}

// Weighted inner product int int f g r dr dz.
inline double inner(const ScalarField& f, const ScalarField& g) {
  f.check_compatible(g);
  return (f.grid().quad_w() * f.values() * g.values()).sum();
}

// Mixed norm L^p_h(L^q_v): q-norm over the vertical period, then p-norm over
// the horizontal unit disk with measure r dr dtheta. Coefficient fields are
// treated as axisymmetric, so the disk integral carries the factor 2 pi.
// Pass kInf for an infinite exponent.
inline double norm_lp_h_lq_v(const ScalarField& f, double p, double q) {
  if (!(p >= 1.0) || !(q >= 1.0))
    throw InvalidArgument("norm_lp_h_lq_v: exponents must satisfy 1 <= p, q <= inf");
  const CylGrid& g = f.grid();
  const Array2D a = f.values().abs();
  Eigen::ArrayXd inner_norm(g.n_r());
  for (int i = 0; i < g.n_r(); ++i) {
    if (std::isinf(q))
      inner_norm(i) = a.row(i).maxCoeff();
    else
      inner_norm(i) = std::pow(g.z_weight() * a.row(i).pow(q).sum(), 1.0 / q);
  }
  if (std::isinf(p)) return inner_norm.maxCoeff();
  return std::pow(kThetaMeasure * (g.radial_weights().array() * inner_norm.pow(p)).sum(), 1.0 / p);
}

// Omega-norm^2 of a coefficient field regarded as axisymmetric: 2 pi int int f^2 r dr dz.
inline double norm2(const ScalarField& f) {
  return kThetaMeasure * (f.grid().quad_w() * f.values().square()).sum();
}

}  // namespace cylmode
