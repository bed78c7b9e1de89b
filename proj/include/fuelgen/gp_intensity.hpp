#pragma once

// Stationary Gaussian-process intensity fields on a regular d x d grid.
//
// The squared-exponential kernel is separable on a tensor grid, so the
// d^2 x d^2 covariance is K_y (x) K_x. Both factors are diagonalized once per
// lengthscale and every d^2-sized operation (sampling, the kriging solve) is
// carried out with d x d matrix products. Node (ix, iy) has flat index
// iy * d + ix and field matrices are stored as M(iy, ix).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "domain.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "random.hpp"

namespace fuelgen {

inline constexpr double kDefaultJitter = 1e-8;
inline constexpr double kMaxJitter = 1e-4;

namespace detail {

inline Eigen::MatrixXd kernel_factor(int d, double spacing, double rho) {
  Eigen::MatrixXd k(d, d);
  const double inv = 1.0 / (2.0 * rho * rho);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double t = (i - j) * spacing;
      k(i, j) = std::exp(-t * t * inv);
    }
  return k;
}

/// Evaluates out[i] = exp(-(u - i h)^2 / (2 rho^2)) for i in [0, d), u measured
/// from the first node. Around the nearest node c, with f = u/h - c and
/// s = h^2/(2 rho^2), out[c + j] = exp(-s f^2) * exp(2 s f)^j * exp(-s j^2), so a
/// row costs two exps plus blocked power products.
class KernelRow {
 public:
  KernelRow(double h, int d, double rho)
      : h_(h), d_(d), s_(h * h / (2.0 * rho * rho)), gauss_(static_cast<std::size_t>(d) + kBlock),
        up_(gauss_.size()), down_(gauss_.size()) {
    for (std::size_t j = 0; j < gauss_.size(); ++j) gauss_[j] = std::exp(-s_ * static_cast<double>(j * j));
  }

  void operator()(double u, double* out) {
    const double a = u / h_;
    const int d = d_;
    if (s_ > 20.0) {
      for (int i = 0; i < d; ++i) out[i] = std::exp(-s_ * (a - i) * (a - i));
      return;
    }
    const int c = std::clamp(static_cast<int>(std::lround(a)), 0, d - 1);
    const double f = a - c;
    const double e0 = std::exp(-s_ * f * f);
    const double r = std::exp(2.0 * s_ * f);
    const int right = d - c, left = c + 1;
    powers(r, right, up_.data());
    powers(1.0 / r, left, down_.data());
    const double* g = gauss_.data();
    const double* up = up_.data();
    const double* down = down_.data();
    for (int j = 0; j < right; ++j) out[c + j] = e0 * up[j] * g[j];
    for (int j = 1; j < left; ++j) out[c - j] = e0 * down[j] * g[j];
  }

 private:
  static constexpr int kBlock = 8;

  static void powers(double q, int n, double* p) {
    p[0] = 1.0;
    for (int t = 1; t < kBlock; ++t) p[t] = p[t - 1] * q;
    const double qb = p[kBlock - 1] * q;
    for (int k = kBlock; k < n; k += kBlock)
      for (int t = 0; t < kBlock; ++t) p[k + t] = p[k - kBlock + t] * qb;
  }

  double h_;
  int d_;
  double s_;
  std::vector<double> gauss_, up_, down_;
};

inline void kernel_row(double u, double h, int d, double rho, double* out) { KernelRow(h, d, rho)(u, out); }

}  // namespace detail

/// Covariance of the GP on the domain grid, entry (i, j) =
/// exp(-|s_i - s_j|^2 / (2 rho^2)) + jitter [i == j].
///
/// Held in factored form: the 1-D kernel factors and their eigensystems. Use
/// dense() to materialize the full d^2 x d^2 matrix.
class CovMatrix {
 public:
  const Domain& domain() const noexcept { return domain_; }
  double rho() const noexcept { return rho_; }
  /// Jitter actually applied (after any escalation).
  double jitter() const noexcept { return jitter_; }
  int grid() const noexcept { return domain_.grid; }
  int size() const noexcept { return domain_.grid * domain_.grid; }

  double operator()(int i, int j) const {
    const int d = grid();
    const double v = ky_(i / d, j / d) * kx_(i % d, j % d);
    return i == j ? v + jitter_ : v;
  }

  Eigen::MatrixXd dense() const {
    const int n = size();
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = (*this)(i, j);
    return c;
  }

  const Eigen::MatrixXd& factor_x() const noexcept { return kx_; }
  const Eigen::MatrixXd& factor_y() const noexcept { return ky_; }
  const Eigen::MatrixXd& basis_x() const noexcept { return qx_; }
  const Eigen::MatrixXd& basis_y() const noexcept { return qy_; }

  /// Eigenvalues of the full matrix arranged as E(iy, ix) = ey_iy * ex_ix + jitter.
  const Eigen::MatrixXd& spectrum() const noexcept { return spectrum_; }

  double min_eigenvalue() const { return spectrum_.minCoeff(); }

 private:
  friend CovMatrix build_covariance(const Domain&, double, double);

  Domain domain_;
  double rho_ = 1.0;
  double jitter_ = 0.0;
  Eigen::MatrixXd kx_, ky_;
  Eigen::MatrixXd qx_, qy_;
  Eigen::MatrixXd spectrum_;
};

/// Builds the grid covariance for lengthscale rho. If the matrix is not
/// numerically positive definite the jitter is escalated x10 (starting from
/// the default when zero was requested) up to 1e-4.
inline CovMatrix build_covariance(const Domain& domain, double rho, double jitter = kDefaultJitter) {
  domain.validate();
  if (!(rho > 0.0) || !std::isfinite(rho)) throw ParameterError("lengthscale rho must be positive");
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw ParameterError("jitter must be non-negative");

  CovMatrix cov;
  cov.domain_ = domain;
  cov.rho_ = rho;
  const int d = domain.grid;
  cov.kx_ = detail::kernel_factor(d, domain.spacing_x(), rho);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sx(cov.kx_);
  if (sx.info() != Eigen::Success) throw NumericalError("eigendecomposition of kernel factor failed");
  cov.qx_ = sx.eigenvectors();
  Eigen::VectorXd ex = sx.eigenvalues();
  Eigen::VectorXd ey;
  if (domain.spacing_x() == domain.spacing_y()) {
    cov.ky_ = cov.kx_;
    cov.qy_ = cov.qx_;
    ey = ex;
  } else {
    cov.ky_ = detail::kernel_factor(d, domain.spacing_y(), rho);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sy(cov.ky_);
    if (sy.info() != Eigen::Success) throw NumericalError("eigendecomposition of kernel factor failed");
    cov.qy_ = sy.eigenvectors();
    ey = sy.eigenvalues();
  }
  const Eigen::MatrixXd products = ey * ex.transpose();
  const double top = products.maxCoeff();
  const double bottom = products.minCoeff();

  double tau = jitter;
  while (bottom + tau <= 1e-12 * (top + tau)) {
    const double next = tau > 0.0 ? tau * 10.0 : kDefaultJitter;
    if (next > kMaxJitter * (1.0 + 1e-9))
      throw NumericalError("covariance not positive definite at rho=" + std::to_string(rho) +
                           " after jitter escalation to " + std::to_string(tau));
    tau = next;
  }
  cov.jitter_ = tau;
  cov.spectrum_ = products.array() + tau;
  return cov;
}

/// A GP realization on the grid plus its precomputed kriging weights.
struct IntensityField {
  Domain domain;
  Eigen::MatrixXd values;        ///< W(iy, ix)
  Eigen::MatrixXd coefficients;  ///< (C + jitter I)^{-1} W, same layout
  std::vector<double> omega;     ///< transformed node values, flat iy * d + ix
  std::optional<Theta> theta;
  std::uint64_t seed = 0;

  double at_node(int ix, int iy) const { return values(iy, ix); }
};

/// Solves (C + jitter I) a = w in the Kronecker eigenbasis.
inline Eigen::MatrixXd kriging_coefficients(const CovMatrix& cov, const Eigen::MatrixXd& values) {
  const Eigen::MatrixXd rotated = cov.basis_y().transpose() * values * cov.basis_x();
  const Eigen::MatrixXd scaled = rotated.array() / cov.spectrum().array();
  return cov.basis_y() * scaled * cov.basis_x().transpose();
}

/// Wraps given node values (d x d, row = y index) as a field.
inline IntensityField field_from_values(const CovMatrix& cov, Eigen::MatrixXd values) {
  const int d = cov.grid();
  if (values.rows() != d || values.cols() != d)
    throw InputError("field values must be a d x d matrix");
  IntensityField f;
  f.domain = cov.domain();
  f.values = std::move(values);
  f.coefficients = kriging_coefficients(cov, f.values);
  return f;
}

/// W = F z with F F^T = C + jitter I, F = (Q_y (x) Q_x) diag(sqrt(spectrum)),
/// z i.i.d. standard normal from the seeded stream.
inline IntensityField sample_field(const CovMatrix& cov, std::uint64_t seed) {
  const int d = cov.grid();
  Engine rng = make_engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(d, d);
  for (int iy = 0; iy < d; ++iy)
    for (int ix = 0; ix < d; ++ix) z(iy, ix) = normal(rng);
  const Eigen::MatrixXd root = cov.spectrum().array().sqrt();
  const Eigen::MatrixXd scaled = root.array() * z.array();
  IntensityField f = field_from_values(cov, cov.basis_y() * scaled * cov.basis_x().transpose());
  f.seed = seed;
  return f;
}

/// Kriging (GP conditional mean) predictor of W at off-grid locations.
/// Holds scratch buffers; use one instance per thread.
class KrigingPredictor {
 public:
  KrigingPredictor(const IntensityField& field, const CovMatrix& cov)
      : field_(&field),
        domain_(cov.domain()),
        rho_(cov.rho()),
        row_x_(cov.domain().spacing_x(), cov.grid(), cov.rho()),
        row_y_(cov.domain().spacing_y(), cov.grid(), cov.rho()),
        kx_(cov.grid()),
        ky_(cov.grid()),
        tmp_(cov.grid()) {
    if (field.coefficients.rows() != cov.grid())
      throw InputError("field and covariance grids differ");
  }

  double operator()(Point p) {
    if (!domain_.contains(p)) throw ParameterError("prediction point outside the domain");
    row_x_(p.x - domain_.x_min, kx_.data());
    row_y_(p.y - domain_.y_min, ky_.data());
    tmp_.noalias() = field_->coefficients * kx_;
    return ky_.dot(tmp_);
  }

  /// Batched form: out[b] = W(points[b]), one matrix product for the batch.
  void operator()(std::span<const Point> points, double* out) {
    const int d = domain_.grid;
    const auto b = static_cast<Eigen::Index>(points.size());
    if (bx_.cols() != b) {
      bx_.resize(d, b);
      by_.resize(d, b);
      bt_.resize(d, b);
    }
    for (Eigen::Index k = 0; k < b; ++k) {
      const Point& p = points[static_cast<std::size_t>(k)];
      if (!domain_.contains(p)) throw ParameterError("prediction point outside the domain");
      row_x_(p.x - domain_.x_min, bx_.col(k).data());
      row_y_(p.y - domain_.y_min, by_.col(k).data());
    }
    bt_.noalias() = field_->coefficients * bx_;
    for (Eigen::Index k = 0; k < b; ++k) out[k] = by_.col(k).dot(bt_.col(k));
  }

 private:
  const IntensityField* field_;
  Domain domain_;
  double rho_;
  detail::KernelRow row_x_, row_y_;
  Eigen::VectorXd kx_, ky_, tmp_;
  Eigen::MatrixXd bx_, by_, bt_;
};

inline std::vector<double> predict_at(const IntensityField& field, const CovMatrix& cov,
                                      std::span<const Point> points) {
  KrigingPredictor predict(field, cov);
  std::vector<double> out(points.size());
  constexpr std::size_t kBatch = 256;
  for (std::size_t i = 0; i < points.size(); i += kBatch)
    predict(points.subspan(i, std::min(kBatch, points.size() - i)), out.data() + i);
  return out;
}

// ---------------------------------------------------------------------------
// Covariates and the logistic transform

/// Logistic function clamped to the open interval (0, 1).
inline double logistic(double t) {
  double v;
  if (t >= 0.0) {
    v = 1.0 / (1.0 + std::exp(-t));
  } else {
    const double e = std::exp(t);
    v = e / (1.0 + e);
  }
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  const double hi = std::nextafter(1.0, 0.0);
  return std::clamp(v, lo, hi);
}

/// Gridded covariate with values in [-1, 1]. Row 0 is the northern-most row
/// (ESRI ASCII grid order). Lookups use the containing cell.
class CovariateField {
 public:
  CovariateField(Domain extent, int ncols, int nrows, std::vector<double> values, std::string name = {})
      : extent_(extent), ncols_(ncols), nrows_(nrows), values_(std::move(values)), name_(std::move(name)) {
    if (ncols_ < 1 || nrows_ < 1) throw InputError("covariate grid must have at least one cell");
    if (values_.size() != static_cast<std::size_t>(ncols_) * nrows_)
      throw InputError("covariate grid has " + std::to_string(values_.size()) + " values, expected " +
                       std::to_string(static_cast<std::size_t>(ncols_) * nrows_));
    if (!(extent_.x_max > extent_.x_min) || !(extent_.y_max > extent_.y_min))
      throw InputError("covariate extent is empty");
    for (double v : values_)
      if (!(v >= -1.0 && v <= 1.0)) throw InputError("covariate value outside [-1, 1]: " + std::to_string(v));
  }

  double value_at(Point p) const {
    const double fx = (p.x - extent_.x_min) / (extent_.x_max - extent_.x_min) * ncols_;
    const double fy = (extent_.y_max - p.y) / (extent_.y_max - extent_.y_min) * nrows_;
    const int col = std::clamp(static_cast<int>(std::floor(fx)), 0, ncols_ - 1);
    const int row = std::clamp(static_cast<int>(std::floor(fy)), 0, nrows_ - 1);
    return values_[static_cast<std::size_t>(row) * ncols_ + col];
  }

  const Domain& extent() const noexcept { return extent_; }
  int ncols() const noexcept { return ncols_; }
  int nrows() const noexcept { return nrows_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::string& name() const noexcept { return name_; }

 private:
  Domain extent_;
  int ncols_;
  int nrows_;
  std::vector<double> values_;
  std::string name_;
};

/// Covariate fields X_1..X_K with weights beta = (beta_0, beta_1, ..., beta_K);
/// beta_0 multiplies the GP field.
struct CovariateStack {
  std::vector<CovariateField> fields;
  std::vector<double> beta{1.0};

  void validate() const {
    if (beta.size() != fields.size() + 1)
      throw ParameterError("beta must have one weight per covariate plus beta_0");
    for (double b : beta)
      if (!(b >= 0.0) || !std::isfinite(b)) throw ParameterError("beta weights must be non-negative");
  }

  /// sum_k beta_k X_k(p), k >= 1.
  double covariate_term(Point p) const {
    double s = 0.0;
    for (std::size_t k = 0; k < fields.size(); ++k) s += beta[k + 1] * fields[k].value_at(p);
    return s;
  }

  double omega(double w, Point p) const { return logistic(beta[0] * w + covariate_term(p)); }
};

/// omega_i = logistic(beta_0 w_i + sum_k beta_k x_k[i]); `covariates[k]` holds
/// X_{k+1} sampled at the same locations as `w`.
inline std::vector<double> transform_intensity(std::span<const double> w,
                                               std::span<const std::vector<double>> covariates,
                                               std::span<const double> beta) {
  if (beta.size() != covariates.size() + 1)
    throw ParameterError("beta must have one weight per covariate plus beta_0");
  for (double b : beta)
    if (!(b >= 0.0) || !std::isfinite(b)) throw ParameterError("beta weights must be non-negative");
  for (const auto& x : covariates) {
    if (x.size() != w.size()) throw InputError("covariate length does not match field length");
    for (double v : x)
      if (!(v >= -1.0 && v <= 1.0)) throw InputError("covariate value outside [-1, 1]");
  }
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    double t = beta[0] * w[i];
    for (std::size_t k = 0; k < covariates.size(); ++k) t += beta[k + 1] * covariates[k][i];
    out[i] = logistic(t);
  }
  return out;
}

/// Fills field.omega at the grid nodes.
inline void transform_field(IntensityField& field, const CovariateStack* covariates) {
  const int d = field.domain.grid;
  field.omega.resize(static_cast<std::size_t>(d) * d);
  for (int iy = 0; iy < d; ++iy)
    for (int ix = 0; ix < d; ++ix) {
      const double w = field.values(iy, ix);
      const Point p{field.domain.node_x(ix), field.domain.node_y(iy)};
      field.omega[static_cast<std::size_t>(iy) * d + ix] =
          covariates ? covariates->omega(w, p) : logistic(w);
    }
}

}  // namespace fuelgen
