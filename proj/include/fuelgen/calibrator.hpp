#pragma once

// Bayesian calibration of Theta against observed metric vectors: a Gaussian
// likelihood on the metrics, an empirical (optionally simulation-augmented)
// metrics covariance, and random-walk Metropolis-Hastings with a stochastic
// likelihood that is re-estimated at both states every iteration.

#include <Eigen/Dense>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "domain.hpp"
#include "errors.hpp"
#include "generator.hpp"
#include "gp_intensity.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace fuelgen {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

enum class Param : std::size_t { Rho, Lambda, Mu, Sigma };
inline constexpr std::size_t kParamCount = 4;
inline constexpr std::array<std::string_view, kParamCount> kParamNames = {"rho", "lambda", "mu", "sigma"};

inline double param_value(const Theta& t, Param p) {
  switch (p) {
    case Param::Rho: return t.rho;
    case Param::Lambda: return t.lambda;
    case Param::Mu: return t.mu;
    case Param::Sigma: return t.sigma;
  }
  return 0.0;
}

inline std::array<double, kParamCount> to_array(const Theta& t) { return {t.rho, t.lambda, t.mu, t.sigma}; }
inline Theta from_array(const std::array<double, kParamCount>& a) { return {a[0], a[1], a[2], a[3]}; }

// ---------------------------------------------------------------------------
// Priors

struct UniformPrior {
  double lo = 0.0;
  double hi = 1.0;
  double logpdf(double x) const { return x >= lo && x <= hi ? -std::log(hi - lo) : kNegInf; }
};

/// Normal(mean, sd^2) restricted to [lo, hi] and renormalized.
struct TruncatedNormalPrior {
  double mean = 1.5;
  double sd = 0.5;
  double lo = 0.0;
  double hi = 3.0;

  double logpdf(double x) const {
    if (!(x >= lo && x <= hi)) return kNegInf;
    const boost::math::normal_distribution<double> n(mean, sd);
    const double mass = boost::math::cdf(n, hi) - boost::math::cdf(n, lo);
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd * std::sqrt(2.0 * std::numbers::pi)) - std::log(mass);
  }
};

/// Gamma(shape, rate).
struct GammaPrior {
  double shape = 1.0;
  double rate = 0.001;
  double logpdf(double x) const {
    if (!(x > 0.0)) return kNegInf;
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
  }
};

/// Priors on Theta. The Gamma prior is placed on sigma^2 while the chain
/// moves in sigma, so prior_logpdf adds the change-of-variables term log(2 sigma).
struct PriorSpec {
  UniformPrior rho{1.5, 15.0};
  UniformPrior lambda{0.0, 10.0};
  TruncatedNormalPrior mu{1.5, 0.5, 0.0, 3.0};
  GammaPrior sigma2{1.0, 0.001};

  void validate() const {
    if (!(rho.lo > 0.0 && rho.hi > rho.lo)) throw ParameterError("rho prior needs 0 < lo < hi");
    if (!(lambda.lo >= 0.0 && lambda.hi > lambda.lo)) throw ParameterError("lambda prior needs 0 <= lo < hi");
    if (!(mu.lo >= 0.0 && mu.hi > mu.lo && mu.sd > 0.0)) throw ParameterError("mu prior needs 0 <= lo < hi, sd > 0");
    if (!(sigma2.shape > 0.0 && sigma2.rate > 0.0)) throw ParameterError("sigma^2 prior needs shape, rate > 0");
  }
};

/// rho ~ Uniform(L/10, L) with L the longer domain side; lambda ~
/// Uniform(0, max(4 lambda_hat, 1)) when an estimate exists, else Uniform(0, 10).
inline PriorSpec default_priors(const Domain& domain, std::optional<double> lambda_hat = std::nullopt) {
  PriorSpec p;
  const double extent = std::max(domain.width(), domain.height());
  p.rho = {0.1 * extent, extent};
  p.lambda = {0.0, lambda_hat ? std::max(4.0 * *lambda_hat, 1.0) : 10.0};
  return p;
}

struct PriorTerms {
  double rho = 0.0;
  double lambda = 0.0;
  double mu = 0.0;
  double sigma2 = 0.0;    ///< density of sigma^2
  double jacobian = 0.0;  ///< log |d sigma^2 / d sigma| = log(2 sigma)
  double total() const { return rho + lambda + mu + sigma2 + jacobian; }
};

inline PriorTerms prior_terms(const Theta& t, const PriorSpec& p) {
  PriorTerms terms;
  terms.rho = p.rho.logpdf(t.rho);
  terms.lambda = p.lambda.logpdf(t.lambda);
  terms.mu = p.mu.logpdf(t.mu);
  terms.sigma2 = p.sigma2.logpdf(t.sigma * t.sigma);
  terms.jacobian = t.sigma > 0.0 ? std::log(2.0 * t.sigma) : kNegInf;
  return terms;
}

/// Log prior density of Theta in (rho, lambda, mu, sigma) coordinates; -inf
/// outside the support.
inline double prior_logpdf(const Theta& t, const PriorSpec& p) {
  const PriorTerms terms = prior_terms(t, p);
  if (!std::isfinite(terms.rho) || !std::isfinite(terms.lambda) || !std::isfinite(terms.mu) ||
      !std::isfinite(terms.sigma2) || !std::isfinite(terms.jacobian))
    return kNegInf;
  return terms.total();
}

/// Central interval of the given prior mass for one parameter.
inline std::pair<double, double> prior_interval(const PriorSpec& p, Param param, double mass = 0.95) {
  const double a = 0.5 * (1.0 - mass), b = 1.0 - a;
  auto uniform = [&](const UniformPrior& u) {
    return std::pair{u.lo + a * (u.hi - u.lo), u.lo + b * (u.hi - u.lo)};
  };
  switch (param) {
    case Param::Rho: return uniform(p.rho);
    case Param::Lambda: return uniform(p.lambda);
    case Param::Mu: {
      const boost::math::normal_distribution<double> n(p.mu.mean, p.mu.sd);
      const double flo = boost::math::cdf(n, p.mu.lo), fhi = boost::math::cdf(n, p.mu.hi);
      return {boost::math::quantile(n, flo + a * (fhi - flo)), boost::math::quantile(n, flo + b * (fhi - flo))};
    }
    case Param::Sigma: {
      const boost::math::gamma_distribution<double> g(p.sigma2.shape, 1.0 / p.sigma2.rate);
      return {std::sqrt(boost::math::quantile(g, a)), std::sqrt(boost::math::quantile(g, b))};
    }
  }
  return {0.0, 0.0};
}

// ---------------------------------------------------------------------------
// Metrics covariance

inline constexpr std::uint32_t kAllMetrics = (1u << kMetricCount) - 1u;

struct CovarianceProvenance {
  std::size_t observed = 0;          ///< m
  std::size_t augmented_samples = 0; ///< m*
  std::size_t per_sample = 0;        ///< K
  std::size_t vectors = 0;           ///< vectors actually pooled
  std::size_t failed_generations = 0;
  double rho_s_lo = 0.0, rho_s_hi = 0.0;
  double shrinkage = 0.0;            ///< alpha in (1 - alpha) S + alpha diag(S)
  std::vector<std::size_t> floored;  ///< components whose variance hit the floor
  std::uint64_t seed = 0;

  bool floor_engaged() const { return !floored.empty(); }
};

struct MetricsCovariance {
  Eigen::MatrixXd matrix;
  CovarianceProvenance provenance;
};

namespace detail {

inline bool numerically_pd(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return false;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return ev.minCoeff() > 1e-12 * ev.maxCoeff();
}

}  // namespace detail

/// Variance floor then shrinkage toward the diagonal until positive definite.
/// The floor for component c is max((0.01 mean|y_c|)^2, 1e-10).
inline void condition_covariance(Eigen::MatrixXd& s, const std::vector<double>& mean_abs,
                                 CovarianceProvenance& prov) {
  const auto k = s.rows();
  for (Eigen::Index c = 0; c < k; ++c) {
    const double floor = std::max(std::pow(0.01 * mean_abs[static_cast<std::size_t>(c)], 2), 1e-10);
    if (!(s(c, c) > floor)) {
      s(c, c) = floor;
      prov.floored.push_back(static_cast<std::size_t>(c));
    }
  }
  // correlations above one can appear once a variance is floored
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      if (i != j) {
        const double bound = std::sqrt(s(i, i) * s(j, j));
        s(i, j) = std::clamp(s(i, j), -bound, bound);
      }
  static constexpr std::array<double, 9> kSteps = {0.0, 1e-3, 1e-2, 0.05, 0.1, 0.2, 0.35, 0.5, 1.0};
  const Eigen::MatrixXd diag = s.diagonal().asDiagonal();
  for (double alpha : kSteps) {
    const Eigen::MatrixXd trial = (1.0 - alpha) * s + alpha * diag;
    if (detail::numerically_pd(trial)) {
      s = trial;
      prov.shrinkage = alpha;
      return;
    }
  }
  throw NumericalError("metrics covariance could not be conditioned");
}

/// Sample covariance (divisor n - 1) of metric vectors, using for each entry
/// the vectors in which both components are unflagged, then conditioned.
inline MetricsCovariance sample_covariance(std::span<const MetricsVector> vectors) {
  if (vectors.empty()) throw InputError("covariance needs at least one metric vector");
  constexpr std::size_t k = kMetricCount;
  std::array<double, k> mean{}, mean_abs{};
  std::array<std::size_t, k> count{};
  for (const MetricsVector& v : vectors)
    for (std::size_t c = 0; c < k; ++c)
      if (!v.flagged(static_cast<Metric>(c))) {
        mean[c] += v.values[c];
        mean_abs[c] += std::abs(v.values[c]);
        ++count[c];
      }
  for (std::size_t c = 0; c < k; ++c)
    if (count[c] > 0) {
      mean[c] /= static_cast<double>(count[c]);
      mean_abs[c] /= static_cast<double>(count[c]);
    }
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k, k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a; b < k; ++b) {
      double acc = 0.0;
      std::size_t n = 0;
      for (const MetricsVector& v : vectors) {
        if (v.flagged(static_cast<Metric>(a)) || v.flagged(static_cast<Metric>(b))) continue;
        acc += (v.values[a] - mean[a]) * (v.values[b] - mean[b]);
        ++n;
      }
      s(a, b) = s(b, a) = n > 1 ? acc / static_cast<double>(n - 1) : 0.0;
    }
  MetricsCovariance out;
  out.provenance.observed = vectors.size();
  out.provenance.vectors = vectors.size();
  condition_covariance(s, std::vector<double>(mean_abs.begin(), mean_abs.end()), out.provenance);
  out.matrix = std::move(s);
  return out;
}

// ---------------------------------------------------------------------------
// Likelihood

/// Gaussian likelihood of observed metric vectors given generated ones:
///   log L = -(k/2) log 2pi - (1/2) log det Sigma
///           - (1/2) sum_i sum_j (y_i - g_j)^T Sigma^{-1} (y_i - g_j).
/// Components flagged in either vector of a pair are dropped from that
/// pair's quadratic form (the matching sub-block of Sigma is used).
class MetricLikelihood {
 public:
  explicit MetricLikelihood(MetricsCovariance sigma, std::uint32_t active = kAllMetrics)
      : sigma_(std::move(sigma)), active_(active & kAllMetrics) {
    if (sigma_.matrix.rows() != static_cast<Eigen::Index>(kMetricCount) || sigma_.matrix.cols() != sigma_.matrix.rows())
      throw InputError("metrics covariance must be 13 x 13");
    if (active_ == 0) throw ParameterError("no metrics selected for the likelihood");
    const Factor& f = factor(active_);
    constant_ = -0.5 * static_cast<double>(f.index.size()) * std::log(2.0 * std::numbers::pi) - 0.5 * f.logdet;
  }

  const MetricsCovariance& covariance() const noexcept { return sigma_; }
  std::uint32_t active() const noexcept { return active_; }

  /// Number of (observed, generated) pairs in which some active component
  /// was excluded by a flag, in the most recent evaluation.
  std::size_t last_excluded_pairs() const noexcept { return excluded_; }

  double operator()(std::span<const MetricsVector> obs, std::span<const MetricsVector> gen) const {
    if (obs.empty() || gen.empty()) throw InputError("likelihood needs observed and generated vectors");
    const auto obs_groups = group(obs);
    const auto gen_groups = group(gen);
    double quad = 0.0;
    std::size_t excluded = 0;
    for (const auto& [fo, io] : obs_groups)
      for (const auto& [fg, ig] : gen_groups) {
        const std::uint32_t mask = active_ & ~(fo | fg);
        if (mask != active_) excluded += io.size() * ig.size();
        if (mask == 0) continue;
        const Factor& f = factor(mask);
        const auto q = static_cast<Eigen::Index>(f.index.size());
        // shift by the first observed vector; the quadratic form only sees differences
        Eigen::VectorXd shift(q);
        for (Eigen::Index c = 0; c < q; ++c) shift(c) = obs[io.front()].values[f.index[c]];
        auto whiten_sum = [&](std::span<const MetricsVector> vs, const std::vector<std::size_t>& ids,
                              Eigen::VectorXd& sum, double& sq) {
          sum = Eigen::VectorXd::Zero(q);
          sq = 0.0;
          Eigen::VectorXd z(q);
          for (std::size_t i : ids) {
            for (Eigen::Index c = 0; c < q; ++c) z(c) = vs[i].values[f.index[c]] - shift(c);
            f.llt.matrixL().solveInPlace(z);
            sum += z;
            sq += z.squaredNorm();
          }
        };
        Eigen::VectorXd so, sg;
        double qo = 0.0, qg = 0.0;
        whiten_sum(obs, io, so, qo);
        whiten_sum(gen, ig, sg, qg);
        quad += static_cast<double>(ig.size()) * qo + static_cast<double>(io.size()) * qg - 2.0 * so.dot(sg);
      }
    excluded_ = excluded;
    return constant_ - 0.5 * quad;
  }

 private:
  struct Factor {
    std::vector<std::size_t> index;
    Eigen::LLT<Eigen::MatrixXd> llt;
    double logdet = 0.0;
  };

  static std::map<std::uint32_t, std::vector<std::size_t>> group(std::span<const MetricsVector> vs) {
    std::map<std::uint32_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < vs.size(); ++i) groups[vs[i].flags & kAllMetrics].push_back(i);
    return groups;
  }

  const Factor& factor(std::uint32_t mask) const {
    std::lock_guard lock(*cache_mutex_);
    auto it = cache_.find(mask);
    if (it != cache_.end()) return *it->second;
    auto f = std::make_unique<Factor>();
    for (std::size_t c = 0; c < kMetricCount; ++c)
      if ((mask >> c) & 1u) f->index.push_back(c);
    const auto q = static_cast<Eigen::Index>(f->index.size());
    Eigen::MatrixXd sub(q, q);
    for (Eigen::Index a = 0; a < q; ++a)
      for (Eigen::Index b = 0; b < q; ++b) sub(a, b) = sigma_.matrix(f->index[a], f->index[b]);
    f->llt.compute(sub);
    if (f->llt.info() != Eigen::Success)
      throw NumericalError("metrics covariance is not positive definite; increase shrinkage toward the diagonal");
    f->logdet = 2.0 * f->llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return *cache_.emplace(mask, std::move(f)).first->second;
  }

  MetricsCovariance sigma_;
  std::uint32_t active_;
  double constant_ = 0.0;
  mutable std::size_t excluded_ = 0;
  mutable std::map<std::uint32_t, std::unique_ptr<Factor>> cache_;
  std::shared_ptr<std::mutex> cache_mutex_ = std::make_shared<std::mutex>();
};

inline double log_likelihood(std::span<const MetricsVector> obs, std::span<const MetricsVector> gen,
                             const MetricsCovariance& sigma) {
  return MetricLikelihood(sigma)(obs, gen);
}

// ---------------------------------------------------------------------------
// Generation context shared by covariance augmentation and the chain

struct GenerationContext {
  Domain domain;
  const CovariateStack* covariates = nullptr;
  MetricsConfig metrics;
  double jitter = kDefaultJitter;
  unsigned workers = 1;
};

namespace stream {
inline constexpr std::uint64_t kObservedMetrics = 21;
inline constexpr std::uint64_t kAugmentation = 22;
inline constexpr std::uint64_t kChain = 23;
}  // namespace stream

/// Pooled empirical estimates over several observed layouts: lambda_hat is
/// the mean density, mu_hat and sigma_hat come from all radii together.
inline EmpiricalEstimates pooled_estimates(std::span<const DiskSet> observations) {
  if (observations.empty()) throw InputError("no observations");
  DiskSet pooled;
  pooled.domain = observations.front().domain;
  double density = 0.0;
  for (const DiskSet& o : observations) {
    density += static_cast<double>(o.size()) / o.domain.area();
    pooled.disks.insert(pooled.disks.end(), o.disks.begin(), o.disks.end());
  }
  EmpiricalEstimates e = empirical_estimates(pooled);
  e.lambda_hat = density / static_cast<double>(observations.size());
  return e;
}

struct AugmentationConfig {
  bool enabled = true;
  std::size_t samples = 25;     ///< m*
  std::size_t per_sample = 25;  ///< K
  double rho_lo = 0.0;          ///< rho_s ~ Uniform(rho_lo, rho_hi]
  double rho_hi = 10.0;
  double relative_se = 0.1;     ///< sd of lambda_s, mu_s, sigma_s relative to the estimate
};

/// Empirical metrics covariance over the observed vectors plus, when enabled,
/// m* x K vectors generated at theta_s drawn around the empirical estimates.
inline MetricsCovariance estimate_covariance(std::span<const MetricsVector> y_obs, const EmpiricalEstimates& theta_hat,
                                             const AugmentationConfig& aug, const GenerationContext& ctx,
                                             std::uint64_t seed) {
  if (y_obs.empty()) throw InputError("covariance estimation needs at least one observation");
  std::vector<MetricsVector> pool(y_obs.begin(), y_obs.end());
  std::size_t failed = 0;
  if (aug.enabled && aug.samples > 0 && aug.per_sample > 0) {
    if (!theta_hat.mu_defined || !theta_hat.sigma_defined || !(theta_hat.lambda_hat > 0.0))
      throw InputError("covariance augmentation needs disk observations with at least two disks");
    if (!(aug.rho_hi > aug.rho_lo) || aug.rho_lo < 0.0) throw ParameterError("rho_s range must satisfy 0 <= lo < hi");
    auto positive_normal = [&](Engine& rng, double centre) {
      std::normal_distribution<double> n(centre, aug.relative_se * centre);
      for (;;) {
        const double v = n(rng);
        if (v > 0.0) return v;
      }
    };
    std::vector<std::shared_ptr<const CovMatrix>> covs(aug.samples);
    std::vector<Theta> thetas(aug.samples);
    for (std::size_t s = 0; s < aug.samples; ++s) {
      Engine rng = make_engine(derive_seed(seed, {stream::kAugmentation, s}));
      Theta t;
      t.lambda = positive_normal(rng, theta_hat.lambda_hat);
      t.mu = positive_normal(rng, theta_hat.mu_hat);
      t.sigma = positive_normal(rng, theta_hat.sigma_hat);
      t.rho = aug.rho_hi - uniform01(rng) * (aug.rho_hi - aug.rho_lo);
      thetas[s] = t;
    }
    parallel_for(aug.samples, ctx.workers, [&](std::size_t s) {
      covs[s] = std::make_shared<const CovMatrix>(build_covariance(ctx.domain, thetas[s].rho, ctx.jitter));
    });
    const std::size_t total = aug.samples * aug.per_sample;
    std::vector<std::optional<MetricsVector>> generated(total);
    parallel_for(total, ctx.workers, [&](std::size_t task) {
      const std::size_t s = task / aug.per_sample, k = task % aug.per_sample;
      const std::uint64_t rs = derive_seed(seed, {stream::kAugmentation, s, k + 1});
      try {
        const RealizationGenerator gen(thetas[s], covs[s], ctx.covariates);
        generated[task] = metrics_vector(gen(rs), ctx.metrics, rs);
      } catch (const GenerationError&) {
      }
    });
    for (auto& g : generated) {
      if (g) pool.push_back(*g);
      else ++failed;
    }
  }
  MetricsCovariance out = sample_covariance(pool);
  out.provenance.observed = y_obs.size();
  out.provenance.augmented_samples = aug.enabled ? aug.samples : 0;
  out.provenance.per_sample = aug.enabled ? aug.per_sample : 0;
  out.provenance.failed_generations = failed;
  out.provenance.rho_s_lo = aug.enabled ? aug.rho_lo : 0.0;
  out.provenance.rho_s_hi = aug.enabled ? aug.rho_hi : 0.0;
  out.provenance.seed = seed;
  return out;
}

// ---------------------------------------------------------------------------
// Stochastic likelihood

/// log L(y_obs | theta) estimated from J fresh realizations at theta. The
/// grid covariance of the two most recent lengthscales is kept.
class StochasticLikelihood {
 public:
  StochasticLikelihood(std::vector<MetricsVector> observed, MetricLikelihood likelihood, GenerationContext ctx,
                       std::size_t J)
      : observed_(std::move(observed)), likelihood_(std::move(likelihood)), ctx_(ctx), J_(J) {
    if (observed_.empty()) throw InputError("no observed metric vectors");
    if (J_ < 1) throw ParameterError("J must be at least 1");
  }

  /// Throws GenerationError when placement stalls at theta.
  double operator()(const Theta& theta, std::uint64_t seed) {
    const auto cov = covariance(theta.rho);
    const RealizationGenerator gen(theta, cov, ctx_.covariates);
    std::vector<MetricsVector> generated(J_);
    parallel_for(J_, ctx_.workers, [&](std::size_t j) {
      const std::uint64_t rs = derive_seed(seed, {j});
      generated[j] = metrics_vector(gen(rs), ctx_.metrics, rs);
    });
    return likelihood_(observed_, generated);
  }

  const MetricLikelihood& likelihood() const noexcept { return likelihood_; }
  const GenerationContext& context() const noexcept { return ctx_; }
  std::size_t realizations() const noexcept { return J_; }

 private:
  std::shared_ptr<const CovMatrix> covariance(double rho) {
    for (const auto& c : cache_)
      if (c && c->rho() == rho) return c;
    auto c = std::make_shared<const CovMatrix>(build_covariance(ctx_.domain, rho, ctx_.jitter));
    cache_[next_] = c;
    next_ = 1 - next_;
    return c;
  }

  std::vector<MetricsVector> observed_;
  MetricLikelihood likelihood_;
  GenerationContext ctx_;
  std::size_t J_;
  std::array<std::shared_ptr<const CovMatrix>, 2> cache_;
  int next_ = 0;
};

// ---------------------------------------------------------------------------
// Metropolis-Hastings

/// Unconstrained coordinates u = (log rho, log lambda, logit(mu / mu_max), log sigma).
struct ThetaTransform {
  double mu_max = 3.0;

  std::array<double, kParamCount> to_u(const Theta& t) const {
    const double f = t.mu / mu_max;
    return {std::log(t.rho), std::log(t.lambda), std::log(f / (1.0 - f)), std::log(t.sigma)};
  }

  Theta from_u(const std::array<double, kParamCount>& u) const {
    return {std::exp(u[0]), std::exp(u[1]), mu_max / (1.0 + std::exp(-u[2])), std::exp(u[3])};
  }

  /// log |d theta / d u|
  double log_jacobian(const Theta& t) const {
    return std::log(t.rho) + std::log(t.lambda) + std::log(t.mu * (mu_max - t.mu) / mu_max) + std::log(t.sigma);
  }
};

struct SamplerConfig {
  std::size_t iterations = 5000;
  double warmup_fraction = 0.5;  ///< proposal scales adapt during this leading share, then freeze
  std::array<double, kParamCount> scales{0.1, 0.1, 0.1, 0.1};  ///< random-walk sd in u coordinates
  bool adapt = true;
  std::size_t adapt_block = 50;
  double target_low = 0.15, target_high = 0.40;
  bool refresh_current = true;

  void validate() const {
    if (iterations < 1) throw ParameterError("iterations must be at least 1");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw ParameterError("warmup_fraction must be in [0, 1)");
    for (double s : scales)
      if (!(s >= 0.0) || !std::isfinite(s)) throw ParameterError("proposal scales must be non-negative");
    if (adapt_block < 1) throw ParameterError("adapt_block must be positive");
  }
};

struct ChainRecord {
  std::size_t iter = 0;
  Theta theta;
  double loglik = 0.0;
  bool accepted = false;
};

struct PosteriorSamples {
  std::vector<ChainRecord> records;
  std::size_t warmup = 0;
  std::size_t generation_failures = 0;
  std::size_t prior_rejections = 0;
  std::array<double, kParamCount> final_scales{};

  double acceptance_rate() const {
    if (records.empty()) return 0.0;
    std::size_t a = 0;
    for (const auto& r : records) a += r.accepted;
    return static_cast<double>(a) / static_cast<double>(records.size());
  }
};

/// Random-walk Metropolis-Hastings in u coordinates. `loglik(theta, seed)`
/// returns the (possibly stochastic) log-likelihood and may throw
/// GenerationError, which counts as -inf. With refresh_current the current
/// state's value is re-estimated every iteration.
///
/// Warm-up: every adapt_block iterations the global scale is multiplied by
/// 0.6 below the target acceptance band and 1.5 above it; halfway through,
/// per-coordinate scales are reset to 2.38/sqrt(4) times the sd of the
/// warm-up draws so far. Scales are frozen afterwards.
template <class LogLik>
PosteriorSamples metropolis_hastings(const PriorSpec& priors, const Theta& init, const SamplerConfig& cfg,
                                     std::uint64_t seed, LogLik&& loglik) {
  cfg.validate();
  priors.validate();
  const ThetaTransform tr{priors.mu.hi};
  double lp = prior_logpdf(init, priors);
  if (!std::isfinite(lp) || !(init.lambda > 0.0) || !(init.mu > 0.0 && init.mu < tr.mu_max))
    throw InputError("initial theta lies outside the prior support");

  PosteriorSamples out;
  out.records.reserve(cfg.iterations);
  out.warmup = cfg.adapt ? static_cast<std::size_t>(cfg.warmup_fraction * static_cast<double>(cfg.iterations)) : 0;

  auto evaluate = [&](const Theta& t, std::uint64_t s) {
    try {
      return loglik(t, s);
    } catch (const GenerationError&) {
      ++out.generation_failures;
      return kNegInf;
    }
  };

  Theta current = init;
  std::array<double, kParamCount> u = tr.to_u(current);
  double lj = tr.log_jacobian(current);
  double ll = cfg.refresh_current ? 0.0 : evaluate(current, derive_seed(seed, {stream::kChain, 0, 1}));
  std::array<double, kParamCount> base = cfg.scales;
  double global = 1.0;
  std::size_t block_accepts = 0, block_len = 0;
  std::vector<std::array<double, kParamCount>> warm_u;

  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    Engine rng = make_engine(derive_seed(seed, {stream::kChain, t, 0}));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::array<double, kParamCount> u_new;
    for (std::size_t c = 0; c < kParamCount; ++c) u_new[c] = u[c] + global * base[c] * normal(rng);
    const double log_u = std::log(uniform01(rng));

    if (cfg.refresh_current) ll = evaluate(current, derive_seed(seed, {stream::kChain, t, 1}));
    // coordinates that did not move keep their exact value
    std::array<double, kParamCount> theta_new = to_array(tr.from_u(u_new));
    for (std::size_t c = 0; c < kParamCount; ++c)
      if (u_new[c] == u[c]) theta_new[c] = to_array(current)[c];
    const Theta proposed = from_array(theta_new);
    const double lp_new = prior_logpdf(proposed, priors);
    bool accepted = false;
    if (!std::isfinite(lp_new) || !(proposed.lambda > 0.0) || !(proposed.mu > 0.0 && proposed.mu < tr.mu_max)) {
      ++out.prior_rejections;
    } else {
      const double ll_new = evaluate(proposed, derive_seed(seed, {stream::kChain, t, 2}));
      const double lj_new = tr.log_jacobian(proposed);
      const double log_alpha = (ll_new + lp_new + lj_new) - (ll + lp + lj);
      if (std::isfinite(ll_new) && (log_u < log_alpha || !std::isfinite(ll))) {
        current = proposed;
        u = u_new;
        ll = ll_new;
        lp = lp_new;
        lj = lj_new;
        accepted = true;
      }
    }
    out.records.push_back({t, current, ll, accepted});

    if (t < out.warmup) {
      warm_u.push_back(u);
      block_accepts += accepted;
      if (++block_len == cfg.adapt_block) {
        const double rate = static_cast<double>(block_accepts) / static_cast<double>(block_len);
        if (rate < cfg.target_low) global *= 0.6;
        else if (rate > cfg.target_high) global *= 1.5;
        block_accepts = block_len = 0;
      }
      if (t + 1 == out.warmup / 2 && warm_u.size() >= 100) {
        std::array<double, kParamCount> mean{}, sd{};
        const auto n = static_cast<double>(warm_u.size());
        for (const auto& w : warm_u)
          for (std::size_t c = 0; c < kParamCount; ++c) mean[c] += w[c] / n;
        for (const auto& w : warm_u)
          for (std::size_t c = 0; c < kParamCount; ++c) sd[c] += (w[c] - mean[c]) * (w[c] - mean[c]) / (n - 1.0);
        bool usable = true;
        for (double& s : sd) {
          s = std::sqrt(s);
          usable = usable && s > 0.0;
        }
        if (usable) {
          for (std::size_t c = 0; c < kParamCount; ++c) base[c] = 2.38 / 2.0 * sd[c];
          global = 1.0;
        }
      }
    }
  }
  for (std::size_t c = 0; c < kParamCount; ++c) out.final_scales[c] = global * base[c];
  return out;
}

// ---------------------------------------------------------------------------
// Posterior summaries

/// Type-7 (linear interpolation) quantile of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InputError("quantile of empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Mode of a Gaussian kernel density estimate (Silverman bandwidth) on a
/// 512-point grid.
inline double kde_mode(std::span<const double> xs) {
  if (xs.empty()) throw InputError("mode of empty data");
  const auto n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x / n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  const double sd = xs.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  const double bw = 0.9 * spread * std::pow(n, -0.2);
  if (!(bw > 0.0)) return sorted[sorted.size() / 2];
  const double lo = sorted.front() - 3.0 * bw, hi = sorted.back() + 3.0 * bw;
  constexpr int kGrid = 512;
  double best = lo, best_density = -1.0;
  for (int g = 0; g < kGrid; ++g) {
    const double x = lo + (hi - lo) * g / (kGrid - 1);
    // only points within 8 bandwidths contribute measurably
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), x - 8.0 * bw);
    const auto last = std::upper_bound(sorted.begin(), sorted.end(), x + 8.0 * bw);
    double density = 0.0;
    for (auto it = first; it != last; ++it) {
      const double z = (x - *it) / bw;
      density += std::exp(-0.5 * z * z);
    }
    if (density > best_density) {
      best_density = density;
      best = x;
    }
  }
  return best;
}

struct ParamSummary {
  double mode = 0.0;
  double mean = 0.0;
  double lo = 0.0;  ///< 2.5% quantile
  double hi = 0.0;  ///< 97.5% quantile
  double width() const { return hi - lo; }
};

struct PosteriorSummary {
  std::array<ParamSummary, kParamCount> params;
  std::size_t draws = 0;
  std::size_t burn_in = 0;
  double acceptance_rate = 0.0;

  const ParamSummary& operator[](Param p) const { return params[static_cast<std::size_t>(p)]; }
};

/// Summaries over the draws after discarding the leading burn_in fraction.
inline PosteriorSummary posterior_summary(const PosteriorSamples& samples, double burn_in = 0.5) {
  if (!(burn_in >= 0.0 && burn_in < 1.0)) throw ParameterError("burn_in must be in [0, 1)");
  const std::size_t total = samples.records.size();
  const auto skip = static_cast<std::size_t>(std::floor(burn_in * static_cast<double>(total)));
  const std::size_t kept = total - skip;
  if (kept < 100)
    throw InputError("chain too short for summaries: " + std::to_string(kept) + " draws after burn-in (need 100)");
  PosteriorSummary s;
  s.draws = kept;
  s.burn_in = skip;
  s.acceptance_rate = samples.acceptance_rate();
  for (std::size_t c = 0; c < kParamCount; ++c) {
    std::vector<double> xs;
    xs.reserve(kept);
    for (std::size_t i = skip; i < total; ++i) xs.push_back(param_value(samples.records[i].theta, static_cast<Param>(c)));
    ParamSummary& p = s.params[c];
    for (double x : xs) p.mean += x / static_cast<double>(kept);
    p.mode = kde_mode(xs);
    std::sort(xs.begin(), xs.end());
    p.lo = quantile_sorted(xs, 0.025);
    p.hi = quantile_sorted(xs, 0.975);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Calibration driver

struct CalibConfig {
  std::size_t J = 25;
  SamplerConfig sampler;
  AugmentationConfig augmentation;
  MetricsConfig metrics;
  std::uint32_t metric_mask = kAllMetrics;
  double burn_in = 0.5;
  double jitter = kDefaultJitter;
  unsigned workers = 1;

  void validate() const {
    if (J < 1) throw ParameterError("J must be at least 1");
    sampler.validate();
    metrics.validate();
    if (!(burn_in >= 0.0 && burn_in < 1.0)) throw ParameterError("burn_in must be in [0, 1)");
    if ((metric_mask & kAllMetrics) == 0) throw ParameterError("metric subset is empty");
  }
};

/// Runs the chain against fixed observed vectors and covariance.
inline PosteriorSamples mcmc_calibrate(std::span<const MetricsVector> y_obs, const PriorSpec& priors,
                                       const MetricsCovariance& sigma, const CalibConfig& cfg,
                                       const GenerationContext& ctx, const Theta& init, std::uint64_t seed) {
  cfg.validate();
  StochasticLikelihood lik(std::vector<MetricsVector>(y_obs.begin(), y_obs.end()),
                           MetricLikelihood(sigma, cfg.metric_mask), ctx, cfg.J);
  return metropolis_hastings(priors, init, cfg.sampler, seed,
                             [&](const Theta& t, std::uint64_t s) { return lik(t, s); });
}

struct CalibrationResult {
  EmpiricalEstimates theta_hat;
  PriorSpec priors;
  std::vector<MetricsVector> observed;
  MetricsCovariance covariance;
  Theta init;
  PosteriorSamples samples;
  std::optional<PosteriorSummary> summary;  ///< absent when fewer than 100 draws survive burn-in
};

/// Starting point: prior midpoint for rho, empirical estimates for the rest
/// (clamped into the prior support).
inline Theta initial_theta(const PriorSpec& priors, const EmpiricalEstimates& e) {
  Theta t;
  t.rho = 0.5 * (priors.rho.lo + priors.rho.hi);
  const double lam_span = priors.lambda.hi - priors.lambda.lo;
  t.lambda = std::clamp(e.lambda_hat, priors.lambda.lo + 1e-3 * lam_span, priors.lambda.hi - 1e-3 * lam_span);
  const double mu_span = priors.mu.hi - priors.mu.lo;
  t.mu = e.mu_defined ? std::clamp(e.mu_hat, priors.mu.lo + 1e-3 * mu_span, priors.mu.hi - 1e-3 * mu_span)
                      : priors.mu.mean;
  t.sigma = e.sigma_defined && e.sigma_hat > 0.0 ? e.sigma_hat : 0.5 * t.mu;
  return t;
}

/// Full pipeline on observed disk layouts: metrics, empirical estimates,
/// default priors (unless given), covariance, chain, summaries.
inline CalibrationResult calibrate(std::span<const DiskSet> observations, const CalibConfig& cfg,
                                   const CovariateStack* covariates, std::uint64_t seed,
                                   std::optional<PriorSpec> priors = std::nullopt) {
  cfg.validate();
  if (observations.empty()) throw InputError("no observations to calibrate against");
  const Domain& domain = observations.front().domain;
  for (const DiskSet& o : observations)
    if (!(o.domain == domain)) throw InputError("observations must share one domain");
  CalibrationResult r;
  r.observed.resize(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i)
    r.observed[i] = metrics_vector(observations[i], cfg.metrics, derive_seed(seed, {stream::kObservedMetrics, i}));
  r.theta_hat = pooled_estimates(observations);
  r.priors = priors ? *priors : default_priors(domain, r.theta_hat.lambda_hat);
  const GenerationContext ctx{domain, covariates, cfg.metrics, cfg.jitter, cfg.workers};
  r.covariance = estimate_covariance(r.observed, r.theta_hat, cfg.augmentation, ctx, derive_seed(seed, {stream::kAugmentation}));
  r.init = initial_theta(r.priors, r.theta_hat);
  r.samples = mcmc_calibrate(r.observed, r.priors, r.covariance, cfg, ctx, r.init, derive_seed(seed, {stream::kChain}));
  const auto skip = static_cast<std::size_t>(std::floor(cfg.burn_in * static_cast<double>(r.samples.records.size())));
  if (r.samples.records.size() - skip >= 100) r.summary = posterior_summary(r.samples, cfg.burn_in);
  return r;
}

}  // namespace fuelgen
