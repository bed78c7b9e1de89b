#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "domain.hpp"
#include "errors.hpp"
#include "gp_intensity.hpp"
#include "model.hpp"
#include "random.hpp"

namespace fuelgen {

inline constexpr double kDefaultCandidateBudget = 1e6;  // proposals per accepted point

/// n ~ Poisson(lambda * area).
inline std::size_t sample_count(double lambda, const Domain& domain, std::uint64_t seed) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ParameterError("lambda must be non-negative");
  const double mean = lambda * domain.area();
  if (mean == 0.0) return 0;
  Engine rng = make_engine(seed);
  std::poisson_distribution<long long> poisson(mean);
  return static_cast<std::size_t>(poisson(rng));
}

struct PlacementStats {
  std::size_t candidates = 0;
  std::size_t accepted = 0;
  double acceptance_rate() const {
    return candidates == 0 ? 1.0 : static_cast<double>(accepted) / static_cast<double>(candidates);
  }
};

/// Draws uniform candidates on the domain and keeps each with probability
/// omega(candidate) until exactly n are accepted. Throws GenerationError once
/// budget_per_point * n candidates have been spent.
template <class OmegaFn>
std::vector<Point> place_points(const Domain& domain, OmegaFn&& omega, std::size_t n, std::uint64_t seed,
                                double budget_per_point = kDefaultCandidateBudget,
                                PlacementStats* stats = nullptr) {
  std::vector<Point> points;
  points.reserve(n);
  PlacementStats local;
  const double budget = budget_per_point * static_cast<double>(n);
  Engine rng = make_engine(seed);
  while (points.size() < n) {
    if (static_cast<double>(local.candidates) >= budget) {
      if (stats) *stats = local;
      throw GenerationError("point placement stalled: " + std::to_string(points.size()) + " of " +
                                std::to_string(n) + " points after " + std::to_string(local.candidates) +
                                " candidates (acceptance rate " + std::to_string(local.acceptance_rate()) + ")",
                            local.acceptance_rate());
    }
    const Point p{domain.x_min + uniform01(rng) * domain.width(), domain.y_min + uniform01(rng) * domain.height()};
    const double u = uniform01(rng);
    ++local.candidates;
    if (u < omega(p)) {
      points.push_back(p);
      ++local.accepted;
    }
  }
  if (stats) *stats = local;
  return points;
}

/// Same acceptance rule and random stream as place_points, but omega is
/// evaluated for blocks of candidates at once: batch_omega(span<const Point>,
/// double* out). Results are identical to the per-point form.
template <class BatchOmegaFn>
std::vector<Point> place_points_batched(const Domain& domain, BatchOmegaFn&& batch_omega, std::size_t n,
                                        std::uint64_t seed, double budget_per_point = kDefaultCandidateBudget,
                                        PlacementStats* stats = nullptr, std::size_t batch = 64) {
  std::vector<Point> points;
  points.reserve(n);
  PlacementStats local;
  const double budget = budget_per_point * static_cast<double>(n);
  Engine rng = make_engine(seed);
  std::vector<Point> cand(batch);
  std::vector<double> u(batch), omega(batch);
  while (points.size() < n) {
    for (std::size_t k = 0; k < batch; ++k) {
      cand[k] = {domain.x_min + uniform01(rng) * domain.width(), domain.y_min + uniform01(rng) * domain.height()};
      u[k] = uniform01(rng);
    }
    batch_omega(std::span<const Point>(cand), omega.data());
    for (std::size_t k = 0; k < batch && points.size() < n; ++k) {
      if (static_cast<double>(local.candidates) >= budget) {
        if (stats) *stats = local;
        throw GenerationError("point placement stalled: " + std::to_string(points.size()) + " of " +
                                  std::to_string(n) + " points after " + std::to_string(local.candidates) +
                                  " candidates (acceptance rate " + std::to_string(local.acceptance_rate()) + ")",
                              local.acceptance_rate());
      }
      ++local.candidates;
      if (u[k] < omega[k]) {
        points.push_back(cand[k]);
        ++local.accepted;
      }
    }
  }
  if (stats) *stats = local;
  return points;
}

/// n i.i.d. draws from the normal(mu, sigma^2) truncated to (0, inf).
/// Plain rejection: mu > 0 keeps the acceptance rate above one half.
inline std::vector<double> sample_radii(double mu, double sigma, std::size_t n, std::uint64_t seed) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ParameterError("radius mean mu must be positive");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ParameterError("radius sd sigma must be positive");
  Engine rng = make_engine(seed);
  std::normal_distribution<double> normal(mu, sigma);
  std::vector<double> radii;
  radii.reserve(n);
  while (radii.size() < n) {
    const double r = normal(rng);
    if (r > 0.0) radii.push_back(r);
  }
  return radii;
}

namespace stream {
inline constexpr std::uint64_t kField = 1;
inline constexpr std::uint64_t kCount = 2;
inline constexpr std::uint64_t kPoints = 3;
inline constexpr std::uint64_t kRadii = 4;
}  // namespace stream

/// Generates realizations at a fixed theta. The grid covariance is built once
/// and shared, so repeated draws only pay for sampling and placement.
class RealizationGenerator {
 public:
  RealizationGenerator(const Theta& theta, const Domain& domain, const CovariateStack* covariates = nullptr,
                       double jitter = kDefaultJitter)
      : theta_(theta), covariates_(covariates) {
    theta_.validate();
    if (covariates_) covariates_->validate();
    cov_ = std::make_shared<const CovMatrix>(build_covariance(domain, theta.rho, jitter));
  }

  RealizationGenerator(const Theta& theta, std::shared_ptr<const CovMatrix> cov,
                       const CovariateStack* covariates = nullptr)
      : theta_(theta), covariates_(covariates), cov_(std::move(cov)) {
    theta_.validate();
    if (covariates_) covariates_->validate();
    if (!cov_ || cov_->rho() != theta.rho) throw ParameterError("covariance lengthscale does not match theta");
  }

  const CovMatrix& covariance() const noexcept { return *cov_; }
  std::shared_ptr<const CovMatrix> shared_covariance() const noexcept { return cov_; }
  const Theta& theta() const noexcept { return theta_; }

  void set_candidate_budget(double per_point) { budget_ = per_point; }

  /// sample_field -> transform -> sample_count -> place_points -> sample_radii.
  DiskSet operator()(std::uint64_t seed, PlacementStats* stats = nullptr) const {
    const Domain& domain = cov_->domain();
    DiskSet out;
    out.domain = domain;
    out.seed = seed;
    out.theta = theta_;
    const std::size_t n = sample_count(theta_.lambda, domain, derive_seed(seed, {stream::kCount}));
    if (n == 0) {
      if (stats) *stats = {};
      return out;
    }
    const IntensityField field = sample_field(*cov_, derive_seed(seed, {stream::kField}));
    KrigingPredictor predict(field, *cov_);
    auto omega = [&](std::span<const Point> pts, double* out) {
      predict(pts, out);
      for (std::size_t k = 0; k < pts.size(); ++k)
        out[k] = covariates_ ? covariates_->omega(out[k], pts[k]) : logistic(out[k]);
    };
    const std::vector<Point> centers =
        place_points_batched(domain, omega, n, derive_seed(seed, {stream::kPoints}), budget_, stats);
    const std::vector<double> radii = sample_radii(theta_.mu, theta_.sigma, n, derive_seed(seed, {stream::kRadii}));
    out.disks.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.disks[i] = Disk{centers[i], radii[i]};
    return out;
  }

 private:
  Theta theta_;
  const CovariateStack* covariates_ = nullptr;
  std::shared_ptr<const CovMatrix> cov_;
  double budget_ = kDefaultCandidateBudget;
};

inline DiskSet generate_realization(const Theta& theta, const Domain& domain, const CovariateStack* covariates,
                                    std::uint64_t seed) {
  return RealizationGenerator(theta, domain, covariates)(seed);
}

/// Pixel (ix, iy) is occupied iff its center lies in some disk (|c - s| <= r).
/// `viewport` defaults to the disk set's own domain.
inline BinaryRaster rasterize(const DiskSet& disks, double pixel_size,
                              const std::optional<Domain>& viewport = std::nullopt) {
  BinaryRaster raster = make_raster(viewport.value_or(disks.domain), pixel_size);
  const Domain& dom = raster.domain;
  const double p = pixel_size;
  for (const Disk& disk : disks.disks) {
    const double cx = disk.center.x, cy = disk.center.y, r = disk.radius;
    // pixel rows whose centers fall in [cy - r, cy + r]
    const int iy_lo = std::max(0, static_cast<int>(std::ceil((cy - r - dom.y_min) / p - 0.5)));
    const int iy_hi = std::min(raster.ny - 1, static_cast<int>(std::floor((cy + r - dom.y_min) / p - 0.5)));
    for (int iy = iy_lo; iy <= iy_hi; ++iy) {
      const double dy = dom.y_min + (iy + 0.5) * p - cy;
      const double h2 = r * r - dy * dy;
      if (h2 < 0.0) continue;
      const double half = std::sqrt(h2);
      int ix_lo = std::max(0, static_cast<int>(std::ceil((cx - half - dom.x_min) / p - 0.5)));
      int ix_hi = std::min(raster.nx - 1, static_cast<int>(std::floor((cx + half - dom.x_min) / p - 0.5)));
      std::uint8_t* row = raster.bits.data() + static_cast<std::size_t>(iy) * raster.nx;
      for (int ix = ix_lo; ix <= ix_hi; ++ix) row[ix] = 1;
    }
  }
  return raster;
}

}  // namespace fuelgen
