#pragma once

// Command-line front end: generate, metrics, calibrate, ingest, render.
// Exit codes: 0 success, 1 user or config error, 2 I/O error, 3 numerical failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "calibrator.hpp"
#include "config.hpp"
#include "generator.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "tls_ingest.hpp"

namespace fuelgen {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kUser = 1;
inline constexpr int kIo = 2;
inline constexpr int kNumerical = 3;
}  // namespace exit_code

namespace cli {

inline constexpr std::uint64_t kPredictiveStream = 31;

struct Common {
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
  std::string config;
};

struct Session {
  RunConfig config;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

/// --seed, then FUELGEN_SEED, then the config `seed` key; otherwise a fresh
/// seed is drawn and printed so the run can be repeated.
inline Session open_session(const Common& c, std::ostream& out) {
  Session s;
  if (!c.config.empty()) s.config = load_config(c.config);
  s.workers = std::max(1u, c.workers);
  if (c.seed) {
    s.seed = *c.seed;
  } else if (const char* env = std::getenv("FUELGEN_SEED"); env && *env) {
    s.seed = detail::parse_seed(env, "FUELGEN_SEED");
  } else if (s.config.seed) {
    s.seed = *s.config.seed;
  } else {
    std::random_device rd;
    s.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    out << "seed: " << s.seed << '\n';
  }
  return s;
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

inline std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext;
}

inline void cmd_generate(const Session& s, std::size_t count, const std::filesystem::path& dir, std::ostream& out) {
  const RunConfig& cfg = s.config;
  const Domain domain = cfg.resolved_domain();
  const auto covariates = load_covariates(cfg);
  const CovariateStack* cov = covariates ? &*covariates : nullptr;
  const RealizationGenerator gen(cfg.theta, domain, cov, cfg.jitter);
  std::vector<DiskSet> sets(count);
  parallel_for(count, s.workers, [&](std::size_t i) { sets[i] = gen(derive_seed(s.seed, {i})); });
  ensure_directory(dir);
  for (std::size_t i = 0; i < count; ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "realization_%03zu", i + 1);
    const std::filesystem::path base = dir / stem;
    save_disks(base.string() + ".csv", sets[i]);
    if (cfg.write_pgm) save_pgm(base.string() + ".pgm", rasterize(sets[i], cfg.pixel_size));
    if (cfg.write_svg) save_svg(base.string() + ".svg", sets[i], cov);
    const EmpiricalEstimates e = empirical_estimates(sets[i]);
    out << stem << ".csv: " << sets[i].size() << " disks, lambda_hat " << detail::format_fixed(e.lambda_hat, 4)
        << ", mu_hat " << detail::format_fixed(e.mu_hat, 4) << ", sigma_hat " << detail::format_fixed(e.sigma_hat, 4)
        << ", seed " << *sets[i].seed << '\n';
  }
}

inline void cmd_metrics(const Session& s, const std::filesystem::path& in, const std::string& out_path,
                        std::ostream& out) {
  const std::string ext = lower_extension(in);
  MetricsVector v;
  if (ext == ".csv") {
    s.config.metrics.validate();
    v = metrics_vector(load_disks(in, s.config.domain), s.config.metrics, s.seed);
  } else if (ext == ".pgm") {
    v = metrics_vector(load_pgm(in), s.config.metrics.grid);
  } else {
    throw InputError("unsupported input extension '" + ext + "' (expected .csv or .pgm)");
  }
  auto emit = [&](std::ostream& o) {
    write_metrics_header(o);
    write_metrics_row(o, v);
  };
  if (out_path.empty() || out_path == "-") emit(out);
  else detail::with_output(out_path, emit);
}

inline std::vector<std::filesystem::path> observation_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw InputError("observation directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && lower_extension(entry.path()) == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("no observation CSV files in " + dir.string());
  return files;
}

inline void cmd_calibrate(const Session& s, const std::filesystem::path& obs_dir, std::optional<std::size_t> iters,
                          const std::filesystem::path& dir, std::ostream& out, std::ostream& err) {
  RunConfig cfg = s.config;
  if (iters) cfg.sampler.iterations = *iters;
  const Domain domain = cfg.resolved_domain();
  std::vector<DiskSet> observations;
  for (const auto& f : observation_files(obs_dir)) observations.push_back(load_disks(f, domain));
  if (observations.size() < 10)
    err << "warning: only " << observations.size()
        << " observed layout(s); posterior uncertainty can be large with few observations\n";
  const auto covariates = load_covariates(cfg);
  const CovariateStack* cov = covariates ? &*covariates : nullptr;
  const EmpiricalEstimates hat = pooled_estimates(observations);
  const PriorSpec priors = cfg.priors(domain, hat.lambda_hat);
  const CalibrationResult r = calibrate(observations, cfg.calib_config(s.workers), cov, s.seed, priors);

  ensure_directory(dir);
  detail::with_output(dir / "chain.csv", [&](std::ostream& o) { write_chain_csv(o, r.samples); });
  detail::with_output(dir / "covariance.csv", [&](std::ostream& o) { write_covariance_csv(o, r.covariance); });
  detail::with_output(dir / "summary.txt", [&](std::ostream& o) { write_summary_text(o, r); });
  if (r.summary) detail::with_output(dir / "summary.csv", [&](std::ostream& o) { write_summary_csv(o, *r.summary, priors); });
  else err << "warning: chain too short for posterior summaries (need 100 draws after burn-in)\n";

  // posterior predictive layouts from evenly spaced retained draws
  const std::size_t total = r.samples.records.size();
  const std::size_t first = r.summary ? r.summary->burn_in : 0;
  const std::size_t kept = total - first;
  const std::size_t k_max = std::min(cfg.predictive, kept);
  for (std::size_t k = 0; k < k_max; ++k) {
    const Theta& t = r.samples.records[first + (k * kept) / k_max + kept / (2 * k_max)].theta;
    const std::uint64_t seed = derive_seed(s.seed, {kPredictiveStream, k});
    try {
      const DiskSet set = RealizationGenerator(t, domain, cov, cfg.jitter)(seed);
      save_svg(dir / ("predictive_" + std::to_string(k + 1) + ".svg"), set, cov);
    } catch (const GenerationError& e) {
      err << "warning: predictive draw " << k + 1 << " failed: " << e.what() << '\n';
    }
  }
  write_summary_text(out, r);
}

inline void cmd_ingest(const Session& s, const std::filesystem::path& cloud_path, const std::filesystem::path& out_path,
                       std::ostream& out) {
  const RunConfig& cfg = s.config;
  const PointCloud cloud = load_pointcloud(cloud_path);
  const std::vector<Point> pts = clip_midstory(cloud, cfg.z_min, cfg.z_max, cfg.domain);
  GmmOptions opt = cfg.gmm;
  opt.workers = s.workers;
  if (pts.size() < 2 * opt.max_components)
    throw InputError("too few points after clipping: " + std::to_string(pts.size()) + " of " +
                     std::to_string(cloud.size()) + " kept, need " + std::to_string(2 * opt.max_components));
  const GmmFit fit = fit_gmm(pts, opt, s.seed);
  const DiskConversion conv = components_to_disks(fit.components, cfg.domain);
  save_disks(out_path, conv.disks);
  out << "points: " << cloud.size() << " read, " << pts.size() << " in the midstory band, "
      << cloud.size() - pts.size() << " clipped\n"
      << "components: " << fit.components.size() + fit.pruned << " fitted, " << fit.pruned
      << " pruned by weight floor, " << conv.dropped << " outside the domain\n"
      << "disks written: " << conv.disks.size() << (fit.converged ? "" : " (EM did not converge)") << '\n';
}

inline void cmd_render(const Session& s, const std::filesystem::path& in,
                       const std::vector<std::string>& covariate_files, const std::filesystem::path& out_path) {
  RunConfig cfg = s.config;
  if (!covariate_files.empty()) cfg.covariate_files.assign(covariate_files.begin(), covariate_files.end());
  const auto covariates = load_covariates(cfg);
  save_svg(out_path, load_disks(in, cfg.domain), covariates ? &*covariates : nullptr);
}

}  // namespace cli

/// Parses argv and runs one subcommand; never throws.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"fuelgen: stochastic generation and calibration of midstory fuel layouts"};
  app.require_subcommand(1);
  app.fallthrough();
  cli::Common common;
  app.add_option("--seed", common.seed, "Root seed (fallback: FUELGEN_SEED, then the config `seed` key)");
  app.add_option("--workers", common.workers, "Maximum worker threads; results do not depend on it")
      ->check(CLI::PositiveNumber);
  app.add_option("--config", common.config, "Flat key = value configuration file (see `fuelgen config`)")
      ->check(CLI::ExistingFile);

  std::size_t count = 1;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "Generate disk layouts with optional PGM and SVG output");
  gen->add_option("--count", count, "Number of realizations")->check(CLI::NonNegativeNumber);
  gen->add_option("--out", gen_out, "Output directory")->required();

  std::string metrics_in, metrics_out;
  auto* met = app.add_subcommand("metrics", "Compute the 13 pattern metrics of a disk CSV or PGM raster");
  met->add_option("--in", metrics_in, "Input .csv (disks) or .pgm (raster)")->required();
  met->add_option("--out", metrics_out, "Output CSV (default: stdout)");

  std::string obs_dir, calib_out;
  std::optional<std::size_t> iters;
  auto* cal = app.add_subcommand("calibrate", "Calibrate theta to observed layouts by MCMC");
  cal->add_option("--obs", obs_dir, "Directory of observed disk CSV files")->required();
  cal->add_option("--iters", iters, "Chain length (overrides calib.iterations)")->check(CLI::PositiveNumber);
  cal->add_option("--out", calib_out, "Output directory")->required();

  std::string cloud_in, ingest_out;
  auto* ing = app.add_subcommand("ingest", "Convert a TLS point cloud (x y z per line) to a disk CSV");
  ing->add_option("--pointcloud", cloud_in, "Point cloud text file")->required();
  ing->add_option("--out", ingest_out, "Output disk CSV")->required();

  std::string render_in, render_out;
  std::vector<std::string> render_covariates;
  auto* ren = app.add_subcommand("render", "Render a disk CSV to SVG");
  ren->add_option("--in", render_in, "Input disk CSV")->required();
  ren->add_option("--covariates", render_covariates, "Covariate grid files drawn as an underlay");
  ren->add_option("--out", render_out, "Output SVG")->required();

  auto* conf = app.add_subcommand("config", "Print the default configuration with documentation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? exit_code::kOk : exit_code::kUser;
  }

  try {
    if (conf->parsed()) {
      write_default_config(out);
      return exit_code::kOk;
    }
    const cli::Session session = cli::open_session(common, out);
    if (gen->parsed()) cli::cmd_generate(session, count, gen_out, out);
    else if (met->parsed()) cli::cmd_metrics(session, metrics_in, metrics_out, out);
    else if (cal->parsed()) cli::cmd_calibrate(session, obs_dir, iters, calib_out, out, err);
    else if (ing->parsed()) cli::cmd_ingest(session, cloud_in, ingest_out, out);
    else if (ren->parsed()) cli::cmd_render(session, render_in, render_covariates, render_out);
    return exit_code::kOk;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kIo;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kUser;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kUser;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return exit_code::kNumerical;
  } catch (const GenerationError& e) {
    err << "generation failed: " << e.what() << '\n';
    return exit_code::kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kNumerical;
  }
}

}  // namespace fuelgen
