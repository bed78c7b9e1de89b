#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fuelgen/cli.hpp"

using namespace fuelgen;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
};

Outcome fuelgen_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fuelgen");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

class Cli : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    unsetenv("FUELGEN_SEED");
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / ("fuelgen_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override {
    unsetenv("FUELGEN_SEED");
    fs::remove_all(dir);
  }

  fs::path path(const std::string& name) const { return dir / name; }
  std::string p(const std::string& name) const { return path(name).string(); }
};

// Small calibration settings so the smoke runs stay quick.
const char* kQuickCalib =
    "domain.x_max = 6\ndomain.y_max = 6\ncalib.J = 3\ncalib.augment_samples = 3\ncalib.augment_per_sample = 3\n"
    "calib.predictive = 2\n";

}  // namespace

TEST_F(Cli, HelpExitsZero) {
  const Outcome r = fuelgen_cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("generate"), std::string::npos);
  EXPECT_NE(r.out.find("calibrate"), std::string::npos);
  EXPECT_EQ(fuelgen_cli({"generate", "--help"}).code, 0);
}

TEST_F(Cli, UnknownFlagIsUserError) {
  EXPECT_EQ(fuelgen_cli({"generate", "--out", p("g"), "--bogus"}).code, 1);
  EXPECT_EQ(fuelgen_cli({"generate"}).code, 1);
}

TEST_F(Cli, ConfigCommandPrintsParsableDefaults) {
  const Outcome r = fuelgen_cli({"config"});
  ASSERT_EQ(r.code, 0);
  spit(path("defaults.cfg"), r.out);
  EXPECT_NO_THROW(load_config(path("defaults.cfg")));
}

TEST_F(Cli, GenerateWithZeroLambdaWritesEmptyLayouts) {
  spit(path("zero.cfg"), "theta.lambda = 0\n");
  const Outcome r = fuelgen_cli({"--seed", "3", "--config", p("zero.cfg"), "generate", "--count", "3", "--out", p("g")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"realization_001.csv", "realization_002.csv", "realization_003.csv"})
    EXPECT_EQ(slurp(path("g") / f), "x,y,r\n");
  EXPECT_NE(r.out.find("realization_003.csv: 0 disks"), std::string::npos);
}

TEST_F(Cli, GenerateIsReproducibleAndParsesBack) {
  ASSERT_EQ(fuelgen_cli({"--seed", "42", "generate", "--count", "2", "--out", p("a")}).code, 0);
  ASSERT_EQ(fuelgen_cli({"--seed", "42", "--workers", "3", "generate", "--count", "2", "--out", p("b")}).code, 0);
  for (const char* f : {"realization_001.csv", "realization_002.csv", "realization_001.pgm", "realization_002.svg"})
    EXPECT_EQ(slurp(path("a") / f), slurp(path("b") / f)) << f;

  const DiskSet set = load_disks(path("a") / "realization_001.csv", square_domain(15.0));
  const DiskSet direct = generate_realization({3, 2, 0.5, 0.2}, RunConfig{}.resolved_domain(), nullptr, derive_seed(42, {0}));
  ASSERT_EQ(set.size(), direct.size());
  ASSERT_GT(set.size(), 0u);
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_NEAR(set.disks[i].center.x, direct.disks[i].center.x, 5e-7);
    EXPECT_NEAR(set.disks[i].radius, direct.disks[i].radius, 5e-7);
    EXPECT_TRUE(set.domain.contains(set.disks[i].center));
  }
  const BinaryRaster r = load_pgm(path("a") / "realization_001.pgm");
  EXPECT_EQ(r.nx, 300);
}

TEST_F(Cli, GenerateIntoUnwritablePathIsIoError) {
  spit(path("blocker"), "not a directory");
  const Outcome r = fuelgen_cli({"--seed", "1", "generate", "--count", "1", "--out", p("blocker") + "/sub"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("cannot create directory"), std::string::npos);
}

TEST_F(Cli, BadConfigNamesTheKey) {
  spit(path("bad.cfg"), "theta.rho = 2\ntheta.lamda = 1\n");
  const Outcome r = fuelgen_cli({"--seed", "1", "--config", p("bad.cfg"), "generate", "--out", p("g")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("theta.lamda"), std::string::npos);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
  EXPECT_EQ(fuelgen_cli({"--seed", "1", "--config", p("missing.cfg"), "generate", "--out", p("g")}).code, 1);
}

TEST_F(Cli, MetricsOfEmptyLayout) {
  spit(path("empty.csv"), "x,y,r\n");
  const Outcome r = fuelgen_cli({"--seed", "1", "metrics", "--in", p("empty.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  const auto rows = read_metrics_csv(in);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0][Metric::Area], 0.0);
  EXPECT_EQ(rows[0][Metric::NEmptyCells], 225.0);
  EXPECT_TRUE(rows[0].flagged(Metric::MuHat));
}

TEST_F(Cli, MetricsOfTwoDiskFixture) {
  spit(path("two.csv"), "x,y,r\n3.0,3.0,1.0\n10.0,10.0,1.0\n");
  ASSERT_EQ(fuelgen_cli({"--seed", "5", "metrics", "--in", p("two.csv"), "--out", p("m.csv")}).code, 0);
  std::ifstream in(path("m.csv"));
  const auto rows = read_metrics_csv(in);
  ASSERT_EQ(rows.size(), 1u);
  const MetricsVector& v = rows[0];
  EXPECT_NEAR(v[Metric::Perimeter], 4 * std::numbers::pi, 1e-9);
  EXPECT_EQ(v[Metric::Ncc], 2.0);
  EXPECT_EQ(v[Metric::Holes], 0.0);
  EXPECT_NEAR(v[Metric::LambdaHat], 2.0 / 225.0, 1e-12);
  EXPECT_EQ(v[Metric::MuHat], 1.0);
  EXPECT_EQ(v[Metric::SigmaHat], 0.0);
  const double a = 2 * std::numbers::pi / 225.0;
  EXPECT_NEAR(v[Metric::Area], a, 4 * std::sqrt(a * (1 - a) / 2000));
}

TEST_F(Cli, MetricsOfRasterFlagsDiskOnlyEntries) {
  BinaryRaster r = make_raster(square_domain(5.0), 0.1);
  for (int y = 10; y < 20; ++y)
    for (int x = 10; x < 20; ++x) r.set(x, y, true);
  save_pgm(path("block.pgm"), r);
  const Outcome run = fuelgen_cli({"--seed", "1", "metrics", "--in", p("block.pgm")});
  ASSERT_EQ(run.code, 0) << run.err;
  std::istringstream in(run.out);
  const MetricsVector v = read_metrics_csv(in).at(0);
  EXPECT_TRUE(v.flagged(Metric::LambdaHat) && v.flagged(Metric::MuHat) && v.flagged(Metric::SigmaHat));
  EXPECT_NEAR(v[Metric::Area], 0.04, 1e-12);
  EXPECT_EQ(v[Metric::Ncc], 1.0);
}

TEST_F(Cli, MetricsRejectsUnknownExtension) {
  spit(path("layout.txt"), "x,y,r\n");
  const Outcome r = fuelgen_cli({"--seed", "1", "metrics", "--in", p("layout.txt")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find(".txt"), std::string::npos);
}

TEST_F(Cli, CalibrateSmokeRun) {
  spit(path("quick.cfg"), kQuickCalib);
  fs::create_directories(path("obs"));
  const Domain dom = Domain{0, 0, 6, 6};
  for (std::uint64_t i = 0; i < 2; ++i)
    save_disks(path("obs") / ("obs_" + std::to_string(i) + ".csv"),
               generate_realization({3, 2, 0.5, 0.2}, dom, nullptr, 70 + i));
  const Outcome r = fuelgen_cli({"--seed", "9", "--config", p("quick.cfg"), "calibrate", "--obs", p("obs"), "--iters",
                             "10", "--out", p("cal")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream chain(slurp(path("cal") / "chain.csv"));
  std::string line;
  std::size_t rows = 0;
  std::getline(chain, line);
  EXPECT_EQ(line, "iter,rho,lambda,mu,sigma,loglik,accepted");
  while (std::getline(chain, line)) ++rows;
  EXPECT_EQ(rows, 10u);
  EXPECT_TRUE(fs::exists(path("cal") / "covariance.csv"));
  EXPECT_TRUE(fs::exists(path("cal") / "summary.txt"));
  EXPECT_TRUE(fs::exists(path("cal") / "predictive_2.svg"));
  EXPECT_NE(r.err.find("only 2 observed layout(s)"), std::string::npos);
  EXPECT_NE(r.out.find("fuelgen calibration summary"), std::string::npos);
}

TEST_F(Cli, CalibrateSingleObservationUsesAugmentation) {
  spit(path("quick.cfg"), kQuickCalib);
  fs::create_directories(path("obs"));
  save_disks(path("obs") / "only.csv", generate_realization({3, 2, 0.5, 0.2}, Domain{0, 0, 6, 6}, nullptr, 80));
  const Outcome r = fuelgen_cli({"--seed", "9", "--config", p("quick.cfg"), "calibrate", "--obs", p("obs"), "--iters",
                             "5", "--out", p("cal")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("only 1 observed layout(s)"), std::string::npos);
  EXPECT_NE(slurp(path("cal") / "covariance.csv").find("observed=1 augmented_samples=3 per_sample=3"), std::string::npos);
}

TEST_F(Cli, CalibrateWithoutObservationsFails) {
  fs::create_directories(path("obs"));
  EXPECT_EQ(fuelgen_cli({"--seed", "1", "calibrate", "--obs", p("obs"), "--out", p("cal")}).code, 1);
  EXPECT_EQ(fuelgen_cli({"--seed", "1", "calibrate", "--obs", p("nowhere"), "--out", p("cal")}).code, 1);
}

TEST_F(Cli, IngestEmptyCloudFails) {
  spit(path("empty.xyz"), "");
  const Outcome r = fuelgen_cli({"--seed", "1", "ingest", "--pointcloud", p("empty.xyz"), "--out", p("d.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("too few points"), std::string::npos);
}

TEST_F(Cli, IngestOutOfBandCloudFails) {
  std::string text;
  for (int i = 0; i < 500; ++i) text += std::to_string(1 + i % 13) + " 5 " + (i % 2 ? "4.5" : "0.01") + "\n";
  spit(path("high.xyz"), text);
  const Outcome r = fuelgen_cli({"--seed", "1", "ingest", "--pointcloud", p("high.xyz"), "--out", p("d.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("0 of 500 kept"), std::string::npos);
}

TEST_F(Cli, IngestParseErrorReportsLine) {
  spit(path("bad.xyz"), "1 2 1\n1 2 1\n# note\n1 2\n");
  const Outcome r = fuelgen_cli({"--seed", "1", "ingest", "--pointcloud", p("bad.xyz"), "--out", p("d.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("line 4"), std::string::npos);
}

TEST_F(Cli, IngestFiveClusters) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 0.3);
  std::uniform_real_distribution<double> z(0.0, 4.0);
  std::string text;
  for (auto [cx, cy] : {std::pair{3.0, 3.0}, {12.0, 3.0}, {7.5, 7.5}, {3.0, 12.0}, {12.0, 12.0}})
    for (int i = 0; i < 600; ++i) text += std::to_string(cx + n(rng)) + ' ' + std::to_string(cy + n(rng)) + ' ' + std::to_string(z(rng)) + '\n';
  spit(path("five.xyz"), text);
  spit(path("ingest.cfg"), "ingest.max_components = 20\n");
  const Outcome r = fuelgen_cli({"--seed", "4", "--config", p("ingest.cfg"), "ingest", "--pointcloud", p("five.xyz"),
                             "--out", p("d.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("disks written: 5"), std::string::npos) << r.out;
  const DiskSet d = load_disks(path("d.csv"), square_domain(15.0));
  EXPECT_EQ(d.size(), 5u);
  for (const Disk& disk : d.disks) EXPECT_NEAR(disk.radius, 0.6, 0.2 * 0.6);
}

TEST_F(Cli, RenderVariants) {
  spit(path("empty.csv"), "x,y,r\n");
  spit(path("one.csv"), "x,y,r\n7.5,7.5,1\n");
  spit(path("canopy.asc"), "ncols 2\nnrows 2\nxmin 0\nymin 0\nxmax 15\nymax 15\n0.5 -0.5\n1 0\n");
  ASSERT_EQ(fuelgen_cli({"render", "--seed", "1", "--in", p("empty.csv"), "--out", p("e.svg")}).code, 0);
  EXPECT_EQ(slurp(path("e.svg")).find("<circle"), std::string::npos);
  ASSERT_EQ(fuelgen_cli({"--seed", "1", "render", "--in", p("one.csv"), "--out", p("o.svg")}).code, 0);
  EXPECT_NE(slurp(path("o.svg")).find("<circle cx=\"300.000\" cy=\"300.000\""), std::string::npos);
  ASSERT_EQ(fuelgen_cli({"--seed", "1", "render", "--in", p("one.csv"), "--covariates", p("canopy.asc"), "--out",
                         p("c.svg")}).code,
            0);
  EXPECT_NE(slurp(path("c.svg")).find("<image"), std::string::npos);
  EXPECT_EQ(fuelgen_cli({"--seed", "1", "render", "--in", p("absent.csv"), "--out", p("x.svg")}).code, 1);
}

TEST_F(Cli, SeedSources) {
  spit(path("zero.cfg"), "theta.lambda = 0.5\n");
  const Outcome drawn = fuelgen_cli({"--config", p("zero.cfg"), "generate", "--count", "1", "--out", p("a")});
  ASSERT_EQ(drawn.code, 0);
  ASSERT_EQ(drawn.out.rfind("seed: ", 0), 0u) << drawn.out;
  const std::string seed = drawn.out.substr(6, drawn.out.find('\n') - 6);
  // replaying the printed seed reproduces the run
  ASSERT_EQ(fuelgen_cli({"--seed", seed, "--config", p("zero.cfg"), "generate", "--count", "1", "--out", p("b")}).code, 0);
  EXPECT_EQ(slurp(path("a") / "realization_001.csv"), slurp(path("b") / "realization_001.csv"));

  setenv("FUELGEN_SEED", "77", 1);
  const Outcome env = fuelgen_cli({"--config", p("zero.cfg"), "generate", "--count", "1", "--out", p("c")});
  ASSERT_EQ(env.code, 0);
  EXPECT_EQ(env.out.find("seed: "), std::string::npos);
  ASSERT_EQ(fuelgen_cli({"--seed", "77", "--config", p("zero.cfg"), "generate", "--count", "1", "--out", p("d")}).code, 0);
  EXPECT_EQ(slurp(path("c") / "realization_001.csv"), slurp(path("d") / "realization_001.csv"));
  unsetenv("FUELGEN_SEED");

  spit(path("seeded.cfg"), "seed = 77\ntheta.lambda = 0.5\n");
  ASSERT_EQ(fuelgen_cli({"--config", p("seeded.cfg"), "generate", "--count", "1", "--out", p("e")}).code, 0);
  EXPECT_EQ(slurp(path("d") / "realization_001.csv"), slurp(path("e") / "realization_001.csv"));
}
