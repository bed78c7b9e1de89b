#pragma once

// Flat `key = value` run configuration shared by the command-line tool.
// Unknown keys are rejected; every key has a documented default.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "calibrator.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "tls_ingest.hpp"

namespace fuelgen {

struct ConfigKey {
  std::string_view key;
  std::string_view fallback;
  std::string_view help;
};

inline constexpr ConfigKey kConfigKeys[] = {
    {"seed", "none", "root seed; --seed and FUELGEN_SEED take precedence"},
    {"domain.x_min", "0", "domain extent, meters"},
    {"domain.y_min", "0", ""},
    {"domain.x_max", "15", ""},
    {"domain.y_max", "15", ""},
    {"domain.grid", "auto", "GP grid resolution d; auto keeps node spacing <= rho prior minimum / 2, at least 32"},
    {"theta.rho", "3", "generation parameters"},
    {"theta.lambda", "2", ""},
    {"theta.mu", "0.5", ""},
    {"theta.sigma", "0.2", ""},
    {"gp.jitter", "1e-8", "diagonal jitter added to the grid covariance"},
    {"covariates.files", "", "comma-separated covariate grid files"},
    {"covariates.beta", "", "comma-separated weights beta_0, beta_1..beta_K (default: all 1)"},
    {"raster.pixel_size", "0.05", "pixel size of PGM output, meters"},
    {"output.pgm", "true", "write a PGM raster next to each generated CSV"},
    {"output.svg", "true", "write an SVG next to each generated CSV"},
    {"metrics.area_samples", "2000", "Monte Carlo samples for the covered area (>= 1000)"},
    {"metrics.perimeter_points", "64", "boundary points per disk (>= 64)"},
    {"metrics.hole_pixel", "0.1", "raster pixel used for hole counting, meters"},
    {"metrics.cell_samples", "16", "Monte Carlo samples per grid cell"},
    {"metrics.cell_size", "1", "grid cell side for cell metrics, meters"},
    {"metrics.adjacency", "rook", "rook or queen"},
    {"metrics.row_standardize", "false", "row-standardize autocorrelation weights"},
    {"metrics.subset", "all", "comma-separated metric names used by the likelihood"},
    {"prior.rho_lo", "auto", "rho prior lower bound (auto: longer side / 10)"},
    {"prior.rho_hi", "auto", "rho prior upper bound (auto: longer side)"},
    {"prior.lambda_hi", "auto", "lambda prior upper bound (auto: max(4 lambda_hat, 1))"},
    {"prior.mu_mean", "1.5", "truncated normal prior on mu"},
    {"prior.mu_sd", "0.5", ""},
    {"prior.mu_lo", "0", ""},
    {"prior.mu_hi", "3", ""},
    {"prior.sigma2_shape", "1", "gamma prior on sigma^2 (shape, rate)"},
    {"prior.sigma2_rate", "0.001", ""},
    {"calib.J", "25", "realizations per likelihood evaluation"},
    {"calib.iterations", "5000", "chain length"},
    {"calib.warmup", "0.5", "adaptive warm-up share of the chain"},
    {"calib.burn_in", "0.5", "share of draws discarded before summaries"},
    {"calib.scales", "0.1,0.1,0.1,0.1", "initial proposal sd in log/logit coordinates"},
    {"calib.adapt", "true", "adapt proposal scales during warm-up"},
    {"calib.augment", "true", "augment the metrics covariance with generated layouts"},
    {"calib.augment_samples", "25", "perturbed parameter sets m*"},
    {"calib.augment_per_sample", "25", "layouts per perturbed set K"},
    {"calib.rho_s_lo", "0", "rho range of the augmentation draws"},
    {"calib.rho_s_hi", "10", ""},
    {"calib.predictive", "5", "posterior predictive SVGs written by calibrate"},
    {"ingest.z_min", "0.1", "midstory height band, meters"},
    {"ingest.z_max", "3", ""},
    {"ingest.max_components", "100", "starting mixture size"},
    {"ingest.sd_min", "0.1", "component sd bounds, meters"},
    {"ingest.sd_max", "1.5", ""},
    {"ingest.weight_floor", "auto", "components below this weight are pruned (auto: 1 / (2 max_components))"},
    {"ingest.restarts", "5", "random restarts"},
    {"ingest.max_points", "0", "subsample cap, 0 keeps all points"},
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  Domain domain = square_domain(15.0);
  bool auto_grid = true;
  Theta theta;
  double jitter = kDefaultJitter;
  std::vector<std::filesystem::path> covariate_files;
  std::vector<double> beta;
  double pixel_size = 0.05;
  bool write_pgm = true;
  bool write_svg = true;
  MetricsConfig metrics;
  std::uint32_t metric_mask = kAllMetrics;
  std::optional<double> rho_lo, rho_hi, lambda_hi;
  TruncatedNormalPrior mu_prior;
  GammaPrior sigma2_prior;
  std::size_t J = 25;
  SamplerConfig sampler;
  double burn_in = 0.5;
  AugmentationConfig augmentation;
  std::size_t predictive = 5;
  double z_min = 0.1, z_max = 3.0;
  GmmOptions gmm;

  /// Priors for a domain; lambda_hat feeds the automatic lambda bound.
  PriorSpec priors(const Domain& d, std::optional<double> lambda_hat) const {
    PriorSpec p = default_priors(d, lambda_hat);
    if (rho_lo) p.rho.lo = *rho_lo;
    if (rho_hi) p.rho.hi = *rho_hi;
    if (lambda_hi) p.lambda.hi = *lambda_hi;
    p.mu = mu_prior;
    p.sigma2 = sigma2_prior;
    p.validate();
    return p;
  }

  /// Domain with the grid resolution resolved against the rho prior.
  Domain resolved_domain() const {
    Domain d = domain;
    if (auto_grid) d.grid = default_grid_resolution(d, rho_lo.value_or(0.1 * std::max(d.width(), d.height())));
    d.validate();
    return d;
  }

  CalibConfig calib_config(unsigned workers) const {
    CalibConfig c;
    c.J = J;
    c.sampler = sampler;
    c.augmentation = augmentation;
    c.metrics = metrics;
    c.metric_mask = metric_mask;
    c.burn_in = burn_in;
    c.jitter = jitter;
    c.workers = workers;
    return c;
  }
};

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InputError("config key '" + key + "' expects true or false, got '" + v + "'");
}

inline double config_double(const std::string& v, const std::string& key) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(x))
    throw InputError("config key '" + key + "' expects a number, got '" + v + "'");
  return x;
}

inline std::size_t config_count(const std::string& v, const std::string& key) {
  const double x = config_double(v, key);
  if (x < 0 || x != std::floor(x)) throw InputError("config key '" + key + "' expects a non-negative integer");
  return static_cast<std::size_t>(x);
}

inline std::uint64_t parse_seed(const std::string& v, const std::string& key) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || v[0] == '-')
    throw InputError("'" + key + "' expects an unsigned integer, got '" + v + "'");
  return x;
}

inline std::vector<double> config_list(const std::string& v, const std::string& key) {
  std::vector<double> out;
  if (v.empty()) return out;
  for (const std::string& f : split(v, ',')) out.push_back(config_double(f, key));
  return out;
}

inline void apply_key(RunConfig& c, const std::string& key, const std::string& v) {
  auto num = [&] { return config_double(v, key); };
  auto count = [&] { return config_count(v, key); };
  auto optional_num = [&]() -> std::optional<double> {
    if (v == "auto") return std::nullopt;
    return num();
  };
  if (key == "seed") {
    if (v == "none") c.seed.reset();
    else c.seed = parse_seed(v, key);
  } else if (key == "domain.x_min") c.domain.x_min = num();
  else if (key == "domain.y_min") c.domain.y_min = num();
  else if (key == "domain.x_max") c.domain.x_max = num();
  else if (key == "domain.y_max") c.domain.y_max = num();
  else if (key == "domain.grid") {
    c.auto_grid = v == "auto";
    if (!c.auto_grid) c.domain.grid = static_cast<int>(count());
  } else if (key == "theta.rho") c.theta.rho = num();
  else if (key == "theta.lambda") c.theta.lambda = num();
  else if (key == "theta.mu") c.theta.mu = num();
  else if (key == "theta.sigma") c.theta.sigma = num();
  else if (key == "gp.jitter") c.jitter = num();
  else if (key == "covariates.files") {
    c.covariate_files.clear();
    if (!v.empty())
      for (const std::string& f : split(v, ',')) c.covariate_files.emplace_back(f);
  } else if (key == "covariates.beta") c.beta = config_list(v, key);
  else if (key == "raster.pixel_size") c.pixel_size = num();
  else if (key == "output.pgm") c.write_pgm = parse_bool(v, key);
  else if (key == "output.svg") c.write_svg = parse_bool(v, key);
  else if (key == "metrics.area_samples") c.metrics.area_samples = count();
  else if (key == "metrics.perimeter_points") c.metrics.perimeter_points = static_cast<int>(count());
  else if (key == "metrics.hole_pixel") c.metrics.hole_pixel = num();
  else if (key == "metrics.cell_samples") c.metrics.cell_samples = static_cast<int>(count());
  else if (key == "metrics.cell_size") c.metrics.grid.cell_size = num();
  else if (key == "metrics.adjacency") {
    if (v == "rook") c.metrics.grid.adjacency = Adjacency::Rook;
    else if (v == "queen") c.metrics.grid.adjacency = Adjacency::Queen;
    else throw InputError("metrics.adjacency must be rook or queen");
  } else if (key == "metrics.row_standardize") c.metrics.grid.row_standardize = parse_bool(v, key);
  else if (key == "metrics.subset") {
    if (v == "all") {
      c.metric_mask = kAllMetrics;
    } else {
      c.metric_mask = 0;
      for (const std::string& name : split(v, ',')) {
        const auto m = metric_from_name(name);
        if (!m) throw InputError("unknown metric '" + name + "' in metrics.subset");
        c.metric_mask |= 1u << static_cast<std::size_t>(*m);
      }
    }
  } else if (key == "prior.rho_lo") c.rho_lo = optional_num();
  else if (key == "prior.rho_hi") c.rho_hi = optional_num();
  else if (key == "prior.lambda_hi") c.lambda_hi = optional_num();
  else if (key == "prior.mu_mean") c.mu_prior.mean = num();
  else if (key == "prior.mu_sd") c.mu_prior.sd = num();
  else if (key == "prior.mu_lo") c.mu_prior.lo = num();
  else if (key == "prior.mu_hi") c.mu_prior.hi = num();
  else if (key == "prior.sigma2_shape") c.sigma2_prior.shape = num();
  else if (key == "prior.sigma2_rate") c.sigma2_prior.rate = num();
  else if (key == "calib.J") c.J = count();
  else if (key == "calib.iterations") c.sampler.iterations = count();
  else if (key == "calib.warmup") c.sampler.warmup_fraction = num();
  else if (key == "calib.burn_in") c.burn_in = num();
  else if (key == "calib.scales") {
    const auto s = config_list(v, key);
    if (s.size() != kParamCount) throw InputError("calib.scales needs four values");
    std::copy(s.begin(), s.end(), c.sampler.scales.begin());
  } else if (key == "calib.adapt") c.sampler.adapt = parse_bool(v, key);
  else if (key == "calib.augment") c.augmentation.enabled = parse_bool(v, key);
  else if (key == "calib.augment_samples") c.augmentation.samples = count();
  else if (key == "calib.augment_per_sample") c.augmentation.per_sample = count();
  else if (key == "calib.rho_s_lo") c.augmentation.rho_lo = num();
  else if (key == "calib.rho_s_hi") c.augmentation.rho_hi = num();
  else if (key == "calib.predictive") c.predictive = count();
  else if (key == "ingest.z_min") c.z_min = num();
  else if (key == "ingest.z_max") c.z_max = num();
  else if (key == "ingest.max_components") c.gmm.max_components = count();
  else if (key == "ingest.sd_min") c.gmm.sd_min = num();
  else if (key == "ingest.sd_max") c.gmm.sd_max = num();
  else if (key == "ingest.weight_floor") c.gmm.weight_floor = optional_num();
  else if (key == "ingest.restarts") c.gmm.restarts = static_cast<int>(count());
  else if (key == "ingest.max_points") c.gmm.max_points = count();
  else throw InputError("unknown config key '" + key + "'");
}

}  // namespace detail

/// Parses `key = value` lines; `#` starts a comment. Later keys override
/// earlier ones.
inline RunConfig parse_config(std::istream& in) {
  RunConfig c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
    const std::string key = detail::trim(t.substr(0, eq)), value = detail::trim(t.substr(eq + 1));
    try {
      detail::apply_key(c, key, value);
    } catch (const ParseError&) {
      throw;
    } catch (const InputError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  c.metrics.validate();
  c.sampler.validate();
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  return detail::with_input(path, [](std::istream& in) { return parse_config(in); });
}

/// The default configuration as a commented file.
inline void write_default_config(std::ostream& out) {
  for (const ConfigKey& k : kConfigKeys) {
    if (!k.help.empty()) out << "# " << k.help << '\n';
    out << k.key << " = " << k.fallback << '\n';
  }
}

/// Loads the covariate stack named by the config, or nothing if none is set.
inline std::optional<CovariateStack> load_covariates(const RunConfig& c) {
  if (c.covariate_files.empty()) return std::nullopt;
  CovariateStack s;
  for (const auto& f : c.covariate_files) s.fields.push_back(load_covariate_grid(f));
  s.beta = c.beta.empty() ? std::vector<double>(s.fields.size() + 1, 1.0) : c.beta;
  s.validate();
  return s;
}

}  // namespace fuelgen
