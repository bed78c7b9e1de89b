// Generate one layout, summarize it, and compare it with a second draw under
// the metric likelihood. Run: ./basic_usage [seed]

#include <cstdlib>
#include <iostream>
#include <vector>

#include "fuelgen/fuelgen.hpp"

int main(int argc, char** argv) {
  using namespace fuelgen;
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 42;

  const Domain domain = square_domain(15.0);
  const Theta theta{3.0, 2.0, 0.5, 0.2};
  const RealizationGenerator gen(theta, domain);

  const DiskSet layout = gen(derive_seed(seed, {0}));
  const MetricsConfig mc;
  const MetricsVector y = metrics_vector(layout, mc, seed);

  std::cout << "disks: " << layout.size() << '\n';
  for (std::size_t k = 0; k < kMetricCount; ++k)
    std::cout << "  " << kMetricNames[k] << " = " << y.values[k] << (y.flags >> k & 1u ? " (undefined)" : "") << '\n';

  // covariance from a few dozen draws at the same theta
  std::vector<MetricsVector> pool;
  for (std::uint64_t i = 1; i <= 40; ++i) pool.push_back(metrics_vector(gen(derive_seed(seed, {i})), mc, i));
  const MetricsCovariance sigma = sample_covariance(pool);
  const MetricLikelihood lik(sigma, kAllMetrics);

  const std::vector<MetricsVector> obs{y};
  const std::vector<MetricsVector> other{metrics_vector(gen(derive_seed(seed, {99})), mc, 99)};
  std::cout << "log-likelihood of a fresh draw: " << lik(obs, other) << '\n';

  save_svg("basic_usage.svg", layout);
  std::cout << "wrote basic_usage.svg\n";
}
