#pragma once

// Point cloud -> disk observation: height clipping, projection to the ground
// plane, and an isotropic Gaussian mixture whose components become disks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "domain.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace fuelgen {

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

struct PointCloud {
  std::vector<Point3> points;
  std::size_t size() const noexcept { return points.size(); }
};

/// Whitespace-delimited `x y z` records; blank lines and lines starting
/// with '#' are skipped.
inline PointCloud parse_pointcloud(std::istream& in) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    Point3 p;
    std::string extra;
    if (!(fields >> p.x >> p.y >> p.z) || (fields >> extra))
      throw ParseError("expected three numbers `x y z`: '" + line + "'", line_no);
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw ParseError("non-finite coordinate", line_no);
    cloud.points.push_back(p);
  }
  return cloud;
}

inline PointCloud load_pointcloud(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open point cloud " + path.string());
  return parse_pointcloud(in);
}

/// Points with z in [z_min, z_max] and (x, y) in the domain, projected to 2-D.
inline std::vector<Point> clip_midstory(const PointCloud& cloud, double z_min = 0.1, double z_max = 3.0,
                                        const Domain& domain = square_domain(15.0)) {
  if (!(z_min < z_max)) throw ParameterError("z_min must be below z_max");
  std::vector<Point> out;
  for (const Point3& p : cloud.points)
    if (p.z >= z_min && p.z <= z_max && domain.contains({p.x, p.y})) out.push_back({p.x, p.y});
  return out;
}

// ---------------------------------------------------------------------------
// Isotropic Gaussian mixture

struct MixtureComponent {
  Point center;
  double sd = 1.0;
  double weight = 0.0;
};

struct GmmOptions {
  std::size_t max_components = 100;
  double sd_min = 0.1;
  double sd_max = 1.5;
  std::optional<double> weight_floor;  ///< defaults to 1 / (2 max_components)
  int restarts = 5;
  int max_iterations = 500;
  double tolerance = 1e-7;  ///< relative change of the objective
  std::size_t max_points = 0;  ///< random subsample cap, 0 keeps all points
  unsigned workers = 1;

  double floor() const { return weight_floor.value_or(1.0 / (2.0 * static_cast<double>(max_components))); }

  void validate() const {
    if (max_components < 1) throw ParameterError("max_components must be positive");
    if (!(sd_min > 0.0 && sd_max >= sd_min)) throw ParameterError("sd bounds must satisfy 0 < min <= max");
    if (!(floor() >= 0.0 && floor() < 1.0)) throw ParameterError("weight_floor must be in [0, 1)");
    if (restarts < 1) throw ParameterError("restarts must be positive");
    if (max_iterations < 1) throw ParameterError("max_iterations must be positive");
  }
};

struct GmmFit {
  std::vector<MixtureComponent> components;
  double loglik = -std::numeric_limits<double>::infinity();  ///< observed-data log-likelihood
  double message_length = std::numeric_limits<double>::infinity();
  double score = std::numeric_limits<double>::infinity();  ///< BIC / 2, used to pick k
  bool converged = false;
  int iterations = 0;
  std::size_t pruned = 0;  ///< components removed by the weight floor
};

namespace detail {

inline constexpr double kLog2Pi = 1.8378770664093453;

/// E-step: responsibilities (row-major n x k) and the observed-data log-likelihood.
inline double gmm_estep(std::span<const Point> pts, const std::vector<MixtureComponent>& comps,
                        std::vector<double>& resp) {
  const std::size_t n = pts.size(), k = comps.size();
  resp.resize(n * k);
  std::vector<double> logw(k), inv2v(k), lognorm(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double v = comps[c].sd * comps[c].sd;
    logw[c] = std::log(comps[c].weight);
    inv2v[c] = 0.5 / v;
    lognorm[c] = -kLog2Pi - std::log(v);
  }
  double ll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double* r = resp.data() + i * k;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double dx = pts[i].x - comps[c].center.x, dy = pts[i].y - comps[c].center.y;
      r[c] = logw[c] + lognorm[c] - (dx * dx + dy * dy) * inv2v[c];
      top = std::max(top, r[c]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      r[c] = std::exp(r[c] - top);
      sum += r[c];
    }
    for (std::size_t c = 0; c < k; ++c) r[c] /= sum;
    ll += top + std::log(sum);
  }
  return ll;
}

/// M-step for means and clamped sds given responsibilities. Returns n_k.
inline std::vector<double> gmm_mstep_shape(std::span<const Point> pts, const std::vector<double>& resp,
                                           std::vector<MixtureComponent>& comps, double sd_min, double sd_max) {
  const std::size_t n = pts.size(), k = comps.size();
  std::vector<double> nk(k, 0.0), sx(k, 0.0), sy(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) {
      const double r = resp[i * k + c];
      nk[c] += r;
      sx[c] += r * pts[i].x;
      sy[c] += r * pts[i].y;
    }
  for (std::size_t c = 0; c < k; ++c)
    if (nk[c] > 0.0) comps[c].center = {sx[c] / nk[c], sy[c] / nk[c]};
  std::vector<double> ss(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) {
      const double dx = pts[i].x - comps[c].center.x, dy = pts[i].y - comps[c].center.y;
      ss[c] += resp[i * k + c] * (dx * dx + dy * dy);
    }
  for (std::size_t c = 0; c < k; ++c)
    if (nk[c] > 0.0) comps[c].sd = std::clamp(std::sqrt(ss[c] / (2.0 * nk[c])), sd_min, sd_max);
  return nk;
}

/// k-means++ seeding: centers, sd from the mean squared distance to the
/// nearest center, equal weights.
inline std::vector<MixtureComponent> kmeanspp_init(std::span<const Point> pts, std::size_t k, double sd_min,
                                                   double sd_max, Engine& rng) {
  const std::size_t n = pts.size();
  std::vector<MixtureComponent> comps;
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
  for (std::size_t c = 0; c < k; ++c) {
    comps.push_back({pts[pick], 1.0, 1.0 / static_cast<double>(k)});
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = pts[i].x - pts[pick].x, dy = pts[i].y - pts[pick].y;
      d2[i] = std::min(d2[i], dx * dx + dy * dy);
      total += d2[i];
    }
    if (c + 1 == k) {
      const double sd = std::sqrt(total / static_cast<double>(n) / 2.0);
      for (auto& comp : comps) comp.sd = std::clamp(sd, sd_min, sd_max);
      break;
    }
    if (!(total > 0.0)) {
      pick = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
      continue;
    }
    double target = uniform01(rng) * total;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= d2[i];
      if (target < 0.0) {
        pick = i;
        break;
      }
    }
  }
  return comps;
}

/// Minimum-message-length objective for k isotropic 2-D components
/// (3 free parameters each) on n points.
inline double message_length(const std::vector<MixtureComponent>& comps, std::size_t n, double loglik) {
  constexpr double kParams = 3.0;
  const auto nd = static_cast<double>(n);
  const auto k = static_cast<double>(comps.size());
  double s = 0.0;
  for (const auto& c : comps) s += std::log(nd * c.weight / 12.0);
  return kParams / 2.0 * s + k / 2.0 * std::log(nd / 12.0) + k * (kParams + 1.0) / 2.0 - loglik;
}

/// Half the Bayesian information criterion: -loglik + (p / 2) log n with
/// p = 4k - 1 free parameters.
inline double bic_score(std::size_t k, std::size_t n, double loglik) {
  return -loglik + 0.5 * (4.0 * static_cast<double>(k) - 1.0) * std::log(static_cast<double>(n));
}

/// EM with the message-length weight update w_k ~ max(0, n_k - 3/2), which
/// annihilates unsupported components. Runs to convergence of the objective.
inline GmmFit mml_em(std::span<const Point> pts, std::vector<MixtureComponent> comps, const GmmOptions& opt) {
  constexpr double kHalfParams = 1.5;
  GmmFit fit;
  std::vector<double> resp;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opt.max_iterations; ++it) {
    gmm_estep(pts, comps, resp);
    const std::vector<double> nk = gmm_mstep_shape(pts, resp, comps, opt.sd_min, opt.sd_max);
    double total = 0.0;
    for (std::size_t c = 0; c < comps.size(); ++c) total += std::max(0.0, nk[c] - kHalfParams);
    if (!(total > 0.0)) {
      // every component is below the support threshold: keep the heaviest
      const auto best = static_cast<std::size_t>(std::max_element(nk.begin(), nk.end()) - nk.begin());
      comps = {comps[best]};
      comps[0].weight = 1.0;
    } else {
      std::vector<MixtureComponent> kept;
      for (std::size_t c = 0; c < comps.size(); ++c) {
        const double w = std::max(0.0, nk[c] - kHalfParams) / total;
        if (w > 0.0) {
          comps[c].weight = w;
          kept.push_back(comps[c]);
        }
      }
      comps = std::move(kept);
    }
    const double ll = gmm_estep(pts, comps, resp);
    const double len = message_length(comps, pts.size(), ll);
    fit.iterations = it;
    fit.loglik = ll;
    fit.message_length = len;
    fit.score = bic_score(comps.size(), pts.size(), ll);
    if (std::abs(prev - len) <= opt.tolerance * std::abs(len)) {
      fit.converged = true;
      break;
    }
    prev = len;
  }
  fit.components = std::move(comps);
  return fit;
}

}  // namespace detail

/// Trace of the observed-data log-likelihood, one entry per EM iteration.
struct EmTrace {
  std::vector<double> loglik;
};

/// Plain EM from the given components at fixed k (standard weight update,
/// sds clamped to the bounds). The log-likelihood is non-decreasing.
inline GmmFit em_fit(std::span<const Point> pts, std::vector<MixtureComponent> comps, const GmmOptions& opt,
                     EmTrace* trace = nullptr) {
  if (comps.empty()) throw InputError("EM needs at least one initial component");
  GmmFit fit;
  std::vector<double> resp;
  double prev = detail::gmm_estep(pts, comps, resp);
  if (trace) trace->loglik.push_back(prev);
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const std::vector<double> nk = detail::gmm_mstep_shape(pts, resp, comps, opt.sd_min, opt.sd_max);
    for (std::size_t c = 0; c < comps.size(); ++c) comps[c].weight = nk[c] / static_cast<double>(pts.size());
    const double ll = detail::gmm_estep(pts, comps, resp);
    if (trace) trace->loglik.push_back(ll);
    fit.iterations = it;
    fit.loglik = ll;
    if (std::abs(ll - prev) <= opt.tolerance * std::abs(ll)) {
      fit.converged = true;
      break;
    }
    prev = ll;
  }
  fit.components = std::move(comps);
  fit.message_length = detail::message_length(fit.components, pts.size(), fit.loglik);
  fit.score = detail::bic_score(fit.components.size(), pts.size(), fit.loglik);
  return fit;
}

/// Sparse isotropic mixture. Each restart is seeded by k-means++ with
/// max_components components and refined by message-length EM, which drops
/// components without support; the weakest component is then removed and
/// the fit re-converged, down to one component, keeping the configuration
/// with the lowest BIC. The best restart wins, and components below the
/// weight floor are pruned (remaining weights are not renormalized).
inline GmmFit fit_gmm(std::span<const Point> points, const GmmOptions& opt, std::uint64_t seed) {
  opt.validate();
  if (points.size() < 2 * opt.max_components)
    throw InputError("mixture fit needs at least " + std::to_string(2 * opt.max_components) + " points, got " +
                     std::to_string(points.size()));
  std::vector<Point> sample;
  std::span<const Point> pts = points;
  if (opt.max_points > 0 && points.size() > opt.max_points) {
    // partial Fisher-Yates: a uniform subsample in a seed-determined order
    sample.assign(points.begin(), points.end());
    Engine rng = make_engine(derive_seed(seed, {0}));
    for (std::size_t i = 0; i < opt.max_points; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(sample.size() - i));
      std::swap(sample[i], sample[std::min(j, sample.size() - 1)]);
    }
    sample.resize(opt.max_points);
    pts = sample;
  }

  std::vector<GmmFit> fits(static_cast<std::size_t>(opt.restarts));
  parallel_for(fits.size(), opt.workers, [&](std::size_t r) {
    Engine rng = make_engine(derive_seed(seed, {1, r}));
    auto comps = detail::kmeanspp_init(pts, opt.max_components, opt.sd_min, opt.sd_max, rng);
    GmmFit current = detail::mml_em(pts, std::move(comps), opt);
    GmmFit best = current;
    while (current.components.size() > 1) {
      auto next = current.components;
      const auto weakest = std::min_element(next.begin(), next.end(), [](const auto& a, const auto& b) {
        return a.weight < b.weight;
      });
      next.erase(weakest);
      double total = 0.0;
      for (const auto& c : next) total += c.weight;
      for (auto& c : next) c.weight /= total;
      current = detail::mml_em(pts, std::move(next), opt);
      if (current.score < best.score) best = current;
    }
    fits[r] = std::move(best);
  });

  GmmFit best = fits.front();
  for (const auto& f : fits)
    if (f.score < best.score) best = f;
  const double floor = opt.floor();
  std::vector<MixtureComponent> kept;
  for (const auto& c : best.components)
    if (c.weight >= floor) kept.push_back(c);
  best.pruned = best.components.size() - kept.size();
  best.components = std::move(kept);
  return best;
}

struct DiskConversion {
  DiskSet disks;
  std::size_t dropped = 0;  ///< components centered outside the domain
};

/// One disk of radius 2 sd per component centered in the domain.
inline DiskConversion components_to_disks(const std::vector<MixtureComponent>& comps, const Domain& domain) {
  DiskConversion out;
  out.disks.domain = domain;
  for (const auto& c : comps) {
    if (domain.contains(c.center)) out.disks.disks.push_back({c.center, 2.0 * c.sd});
    else ++out.dropped;
  }
  return out;
}

}  // namespace fuelgen
