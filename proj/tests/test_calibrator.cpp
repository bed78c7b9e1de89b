#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "fuelgen/calibrator.hpp"
#include "stats.hpp"

using namespace fuelgen;
using std::numbers::pi;

namespace {

MetricsCovariance identity_covariance() {
  MetricsCovariance c;
  c.matrix = Eigen::MatrixXd::Identity(kMetricCount, kMetricCount);
  return c;
}

MetricsVector filled(double v) {
  MetricsVector m;
  m.values.fill(v);
  return m;
}

PosteriorSamples chain_of(const std::vector<double>& xs) {
  PosteriorSamples s;
  for (std::size_t i = 0; i < xs.size(); ++i) s.records.push_back({i, Theta{xs[i], 1.0, 1.0, 1.0}, 0.0, true});
  return s;
}

}  // namespace

TEST(Priors, OutsideSupportIsMinusInfinity) {
  const PriorSpec p;
  EXPECT_EQ(prior_logpdf({5.0, 2.0, 3.5, 0.2}, p), kNegInf);
  EXPECT_EQ(prior_logpdf({1.0, 2.0, 0.5, 0.2}, p), kNegInf);
  EXPECT_EQ(prior_logpdf({5.0, 11.0, 0.5, 0.2}, p), kNegInf);
  EXPECT_EQ(prior_logpdf({5.0, 2.0, 0.5, 0.0}, p), kNegInf);
}

TEST(Priors, ComponentDensities) {
  const PriorSpec p;
  EXPECT_NEAR(p.rho.logpdf(8.0), -std::log(13.5), 1e-12);
  // Gamma(1, 0.001) at 1 is log(0.001) - 0.001
  EXPECT_NEAR(p.sigma2.logpdf(1.0), std::log(0.001) - 0.001, 1e-12);
  // truncated normal renormalizes by the mass on [0, 3]
  const double mass = std::erf(3.0 / std::sqrt(2.0));
  EXPECT_NEAR(p.mu.logpdf(1.5), -std::log(0.5 * std::sqrt(2 * pi)) - std::log(mass), 1e-12);

  const Theta t{4.0, 2.0, 0.7, 0.3};
  const PriorTerms terms = prior_terms(t, p);
  EXPECT_NEAR(terms.jacobian, std::log(0.6), 1e-12);
  EXPECT_NEAR(prior_logpdf(t, p), terms.total(), 1e-12);
}

TEST(Priors, DefaultsFollowDomainAndEstimate) {
  const PriorSpec p = default_priors(Domain{0, 0, 20, 12}, 1.5);
  EXPECT_DOUBLE_EQ(p.rho.lo, 2.0);
  EXPECT_DOUBLE_EQ(p.rho.hi, 20.0);
  EXPECT_DOUBLE_EQ(p.lambda.hi, 6.0);
  EXPECT_DOUBLE_EQ(default_priors(square_domain(15.0), 0.1).lambda.hi, 1.0);
  EXPECT_DOUBLE_EQ(default_priors(square_domain(15.0)).lambda.hi, 10.0);
}

TEST(Priors, CentralIntervals) {
  const PriorSpec p;
  const auto [s_lo, s_hi] = prior_interval(p, Param::Sigma);
  // sqrt of the Gamma(1, rate 0.001) quantiles: -1000 log(1 - q)
  EXPECT_NEAR(s_lo, std::sqrt(-1000.0 * std::log(0.975)), 1e-9);
  EXPECT_NEAR(s_hi, std::sqrt(-1000.0 * std::log(0.025)), 1e-9);
  EXPECT_NEAR(s_lo, 5.03, 0.005);
  EXPECT_NEAR(s_hi, 60.74, 0.005);
  const auto [m_lo, m_hi] = prior_interval(p, Param::Mu);
  EXPECT_NEAR(m_lo, 0.531, 0.001);
  EXPECT_NEAR(m_hi, 2.469, 0.001);
  EXPECT_NEAR(m_lo + m_hi, 3.0, 1e-9);
  const auto [r_lo, r_hi] = prior_interval(p, Param::Rho);
  EXPECT_NEAR(r_lo, 1.5 + 0.025 * 13.5, 1e-12);
  EXPECT_NEAR(r_hi, 1.5 + 0.975 * 13.5, 1e-12);
}

TEST(Priors, ValidationRejectsBadSpecs) {
  PriorSpec p;
  p.rho = {0.0, 5.0};
  EXPECT_THROW(p.validate(), ParameterError);
  p = PriorSpec{};
  p.sigma2.rate = 0.0;
  EXPECT_THROW(p.validate(), ParameterError);
}

TEST(Likelihood, IdenticalVectorsGiveNormalizingConstant) {
  const MetricsVector y = filled(0.3);
  const std::vector<MetricsVector> obs{y}, gen{y};
  EXPECT_NEAR(log_likelihood(obs, gen, identity_covariance()), -6.5 * std::log(2 * pi), 1e-12);
}

TEST(Likelihood, ScalarGaussian) {
  // k = 1, Sigma = [4], y_obs = 0, y_gen = 2: -0.5 log(8 pi) - 0.5 * 4 / 4
  MetricsCovariance c = identity_covariance();
  c.matrix(0, 0) = 4.0;
  const MetricLikelihood lik(c, 1u);
  MetricsVector o, g;
  g.values[0] = 2.0;
  g.values[5] = 100.0;  // inactive
  const double expected = -0.5 * std::log(2 * pi * 4.0) - 0.5;
  EXPECT_NEAR(expected, -2.1121, 5e-5);
  EXPECT_NEAR(lik(std::vector{o}, std::vector{g}), expected, 1e-12);
}

TEST(Likelihood, SymmetricInObservedAndGenerated) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(kMetricCount, kMetricCount);
  MetricsCovariance c;
  c.matrix = a * a.transpose() + Eigen::MatrixXd::Identity(kMetricCount, kMetricCount);
  MetricsVector x, y;
  for (auto& v : x.values) v = n(rng);
  for (auto& v : y.values) v = n(rng);
  EXPECT_NEAR(log_likelihood(std::vector{x}, std::vector{y}, c), log_likelihood(std::vector{y}, std::vector{x}, c),
              1e-10);
}

TEST(Likelihood, MatchesDenseQuadraticForm) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(kMetricCount, kMetricCount);
  MetricsCovariance c;
  c.matrix = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(kMetricCount, kMetricCount);
  std::vector<MetricsVector> obs(3), gen(4);
  for (auto* set : {&obs, &gen})
    for (auto& m : *set)
      for (auto& v : m.values) v = n(rng);
  const Eigen::MatrixXd inv = c.matrix.inverse();
  double quad = 0.0;
  for (const auto& o : obs)
    for (const auto& g : gen) {
      Eigen::VectorXd d(kMetricCount);
      for (std::size_t k = 0; k < kMetricCount; ++k) d(k) = o.values[k] - g.values[k];
      quad += d.dot(inv * d);
    }
  const double expected = -6.5 * std::log(2 * pi) - 0.5 * std::log(c.matrix.determinant()) - 0.5 * quad;
  EXPECT_NEAR(log_likelihood(obs, gen, c), expected, 1e-8 * std::abs(expected));
}

TEST(Likelihood, FlaggedComponentsAreExcluded) {
  const MetricLikelihood lik(identity_covariance());
  MetricsVector o, g;
  g.values[4] = 50.0;
  g.flag(Metric::MoranI);
  g.values[4] = 50.0;  // a flagged value must not enter the quadratic form
  const double with_flag = lik(std::vector{o}, std::vector{g});
  EXPECT_EQ(lik.last_excluded_pairs(), 1u);
  EXPECT_NEAR(with_flag, -6.5 * std::log(2 * pi), 1e-12);
  MetricsVector plain;
  lik(std::vector{o}, std::vector{plain});
  EXPECT_EQ(lik.last_excluded_pairs(), 0u);
}

TEST(Likelihood, RejectsEmptyInputs) {
  const MetricLikelihood lik(identity_covariance());
  EXPECT_THROW(lik(std::vector<MetricsVector>{}, std::vector{MetricsVector{}}), InputError);
  EXPECT_THROW(MetricLikelihood(identity_covariance(), 0u), ParameterError);
}

TEST(Covariance, MatchesTextbookEstimator) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<MetricsVector> vs(60);
  Eigen::MatrixXd data(60, kMetricCount);
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (std::size_t k = 0; k < kMetricCount; ++k) data(i, k) = vs[i].values[k] = 1.0 + k + n(rng) * (0.5 + 0.1 * k);
  const Eigen::MatrixXd centred = data.rowwise() - data.colwise().mean();
  const Eigen::MatrixXd expected = centred.transpose() * centred / 59.0;
  const MetricsCovariance c = sample_covariance(vs);
  EXPECT_TRUE(c.provenance.floored.empty());
  EXPECT_EQ(c.provenance.shrinkage, 0.0);
  EXPECT_LT((c.matrix - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Covariance, IdenticalVectorsEngageFloor) {
  const std::vector<MetricsVector> vs(5, filled(2.0));
  const MetricsCovariance c = sample_covariance(vs);
  EXPECT_EQ(c.provenance.floored.size(), kMetricCount);
  for (std::size_t k = 0; k < kMetricCount; ++k) EXPECT_NEAR(c.matrix(k, k), 4e-4, 1e-15);
  EXPECT_TRUE(Eigen::LLT<Eigen::MatrixXd>(c.matrix).info() == Eigen::Success);
}

TEST(Covariance, AugmentationPoolsGeneratedVectors) {
  const Domain dom = square_domain(5.0, 12);
  const GenerationContext ctx{dom, nullptr, MetricsConfig{}, kDefaultJitter, 1};
  std::vector<MetricsVector> obs;
  for (std::uint64_t i = 0; i < 3; ++i) {
    const std::uint64_t s = derive_seed(40, {i});
    obs.push_back(metrics_vector(generate_realization({3.0, 2.0, 0.5, 0.2}, dom, nullptr, s), ctx.metrics, s));
  }
  AugmentationConfig aug;
  aug.samples = 4;
  aug.per_sample = 5;
  const EmpiricalEstimates hat{2.0, 0.5, 0.2, true, true};
  const MetricsCovariance c = estimate_covariance(obs, hat, aug, ctx, 9);
  EXPECT_EQ(c.provenance.observed, 3u);
  EXPECT_EQ(c.provenance.vectors + c.provenance.failed_generations, 3u + 20u);
  EXPECT_EQ(c.provenance.augmented_samples, 4u);
  EXPECT_EQ(c.provenance.per_sample, 5u);

  aug.enabled = false;
  EXPECT_EQ(estimate_covariance(obs, hat, aug, ctx, 9).provenance.vectors, 3u);
  aug.enabled = true;
  EXPECT_THROW(estimate_covariance(obs, EmpiricalEstimates{}, aug, ctx, 9), InputError);
}

TEST(Sampler, ZeroScaleGivesConstantChain) {
  SamplerConfig cfg;
  cfg.iterations = 200;
  cfg.scales = {0, 0, 0, 0};
  cfg.adapt = false;
  const Theta init{5.0, 2.0, 0.5, 0.2};
  const auto s = metropolis_hastings(PriorSpec{}, init, cfg, 3, [](const Theta&, std::uint64_t) { return -1.0; });
  ASSERT_EQ(s.records.size(), 200u);
  for (const auto& r : s.records) {
    EXPECT_EQ(r.theta.rho, init.rho);
    EXPECT_EQ(r.theta.sigma, init.sigma);
  }
}

TEST(Sampler, DrawsStayInPriorSupport) {
  SamplerConfig cfg;
  cfg.iterations = 3000;
  cfg.scales = {1.0, 1.0, 1.0, 1.0};
  const PriorSpec p;
  const auto s = metropolis_hastings(p, {5.0, 2.0, 0.5, 0.2}, cfg, 4, [](const Theta&, std::uint64_t) { return 0.0; });
  EXPECT_GT(s.prior_rejections, 0u);
  for (const auto& r : s.records) EXPECT_TRUE(std::isfinite(prior_logpdf(r.theta, p)));
}

TEST(Sampler, RecoversKnownGaussianTarget) {
  // a deterministic likelihood much narrower than the prior
  const Theta centre{5.0, 2.0, 0.5, 0.2};
  const Theta sd{0.2, 0.05, 0.02, 0.01};
  auto loglik = [&](const Theta& t, std::uint64_t) {
    double q = 0.0;
    for (std::size_t c = 0; c < kParamCount; ++c) {
      const double z = (to_array(t)[c] - to_array(centre)[c]) / to_array(sd)[c];
      q += z * z;
    }
    return -0.5 * q;
  };
  SamplerConfig cfg;
  cfg.iterations = 40000;
  cfg.scales = {0.02, 0.02, 0.02, 0.02};
  const auto s = metropolis_hastings(PriorSpec{}, centre, cfg, 5, loglik);
  const PosteriorSummary sum = posterior_summary(s);
  for (std::size_t c = 0; c < kParamCount; ++c) {
    const double target = to_array(centre)[c], spread = to_array(sd)[c];
    EXPECT_NEAR(sum.params[c].mean, target, 0.25 * spread) << kParamNames[c];
    EXPECT_NEAR(sum.params[c].width(), 2 * 1.96 * spread, 0.25 * 2 * 1.96 * spread) << kParamNames[c];
  }
  EXPECT_GT(s.acceptance_rate(), 0.1);
}

TEST(Sampler, RejectsInitOutsideSupport) {
  SamplerConfig cfg;
  cfg.iterations = 5;
  EXPECT_THROW(metropolis_hastings(PriorSpec{}, {5.0, 2.0, 3.5, 0.2}, cfg, 1,
                                   [](const Theta&, std::uint64_t) { return 0.0; }),
               InputError);
}

TEST(Sampler, GenerationFailureCountsAsRejection) {
  SamplerConfig cfg;
  cfg.iterations = 20;
  cfg.refresh_current = false;
  int calls = 0;
  const auto s = metropolis_hastings(PriorSpec{}, {5.0, 2.0, 0.5, 0.2}, cfg, 2, [&](const Theta&, std::uint64_t) {
    if (calls++ > 0) throw GenerationError("stalled", 0.0);
    return 0.0;
  });
  EXPECT_EQ(s.generation_failures + s.prior_rejections, 20u);
  EXPECT_EQ(s.acceptance_rate(), 0.0);
}

class StochasticFixture : public ::testing::Test {
 protected:
  Domain dom = square_domain(5.0, 12);
  std::vector<MetricsVector> obs;
  MetricsCovariance cov;

  void SetUp() override {
    std::vector<MetricsVector> pool;
    for (std::uint64_t i = 0; i < 30; ++i) {
      const std::uint64_t s = derive_seed(50, {i});
      pool.push_back(metrics_vector(generate_realization({3.0, 2.0, 0.5, 0.2}, dom, nullptr, s), MetricsConfig{}, s));
    }
    obs.assign(pool.begin(), pool.begin() + 3);
    cov = sample_covariance(pool);
  }

  StochasticLikelihood make(unsigned workers, std::size_t J = 4) const {
    return StochasticLikelihood(obs, MetricLikelihood(cov), GenerationContext{dom, nullptr, MetricsConfig{}, kDefaultJitter, workers}, J);
  }
};

TEST_F(StochasticFixture, RefreshChangesEstimateAtFixedTheta) {
  auto lik = make(1);
  const Theta t{3.0, 2.0, 0.5, 0.2};
  const double a = lik(t, 1), b = lik(t, 2), c = lik(t, 1);
  EXPECT_NE(a, b);
  EXPECT_EQ(a, c);
}

TEST_F(StochasticFixture, WorkerCountDoesNotChangeChain) {
  auto one = make(1), three = make(3);
  SamplerConfig cfg;
  cfg.iterations = 15;
  const Theta init{2.0, 2.0, 0.5, 0.2};
  const PriorSpec p = default_priors(dom, 2.0);
  const auto a = metropolis_hastings(p, init, cfg, 8, [&](const Theta& t, std::uint64_t s) { return one(t, s); });
  const auto b = metropolis_hastings(p, init, cfg, 8, [&](const Theta& t, std::uint64_t s) { return three(t, s); });
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].theta.rho, b.records[i].theta.rho);
    EXPECT_EQ(a.records[i].theta.lambda, b.records[i].theta.lambda);
    EXPECT_EQ(a.records[i].loglik, b.records[i].loglik);
  }
}

TEST(Summary, QuantileTypeSeven) {
  const std::vector<double> xs{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile_sorted(xs, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_sorted(xs, 0.1), 1.3);
  EXPECT_DOUBLE_EQ(quantile_sorted(xs, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(xs, 1.0), 4.0);
}

TEST(Summary, ConstantChain) {
  const PosteriorSummary s = posterior_summary(chain_of(std::vector<double>(400, 2.5)));
  const ParamSummary& r = s[Param::Rho];
  EXPECT_DOUBLE_EQ(r.mean, 2.5);
  EXPECT_DOUBLE_EQ(r.lo, 2.5);
  EXPECT_DOUBLE_EQ(r.hi, 2.5);
  EXPECT_DOUBLE_EQ(r.mode, 2.5);
}

TEST(Summary, StandardNormalDraws) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> xs(40000);
  for (double& x : xs) x = n(rng);
  const PosteriorSummary s = posterior_summary(chain_of(xs));
  // the 2.5% quantile of 20000 draws has sd sqrt(p (1 - p) / N) / phi(1.96)
  const double se = std::sqrt(0.025 * 0.975 / 20000.0) / (std::exp(-0.5 * 1.96 * 1.96) / std::sqrt(2 * pi));
  EXPECT_NEAR(s[Param::Rho].lo, -1.96, 3 * se);
  EXPECT_NEAR(s[Param::Rho].hi, 1.96, 3 * se);
  EXPECT_NEAR(s[Param::Rho].mode, 0.0, 0.1);
}

TEST(Summary, BurnInDropsLeadingHalf) {
  std::vector<double> xs(1000);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = i < 500 ? 100.0 : 1.0;
  const PosteriorSummary s = posterior_summary(chain_of(xs), 0.5);
  EXPECT_EQ(s.draws, 500u);
  EXPECT_EQ(s.burn_in, 500u);
  EXPECT_DOUBLE_EQ(s[Param::Rho].hi, 1.0);
}

TEST(Summary, ShortChainIsAnInputError) {
  EXPECT_THROW(posterior_summary(chain_of(std::vector<double>(150, 1.0))), InputError);
  EXPECT_THROW(posterior_summary(chain_of(std::vector<double>(400, 1.0)), 1.0), ParameterError);
}

TEST(Calibrate, ShortRunEndToEnd) {
  const Domain dom = square_domain(5.0, 12);
  std::vector<DiskSet> obs;
  for (std::uint64_t i = 0; i < 3; ++i) obs.push_back(generate_realization({3.0, 2.0, 0.5, 0.2}, dom, nullptr, 60 + i));
  CalibConfig cfg;
  cfg.J = 3;
  cfg.sampler.iterations = 30;
  cfg.augmentation.samples = 3;
  cfg.augmentation.per_sample = 3;
  const CalibrationResult r = calibrate(obs, cfg, nullptr, 11);
  EXPECT_EQ(r.samples.records.size(), 30u);
  EXPECT_FALSE(r.summary.has_value());
  EXPECT_EQ(r.covariance.provenance.observed, 3u);
  const CalibrationResult again = calibrate(obs, cfg, nullptr, 11);
  EXPECT_EQ(again.samples.records.back().theta.rho, r.samples.records.back().theta.rho);
}
