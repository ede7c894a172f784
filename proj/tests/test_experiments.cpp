#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "cuefield/experiments.hpp"

using namespace cuefield;
namespace fs = std::filesystem;

namespace {

double stat(const RunResult& r, const std::string& name, const std::string& key = "", const json& v = nullptr) {
  const Row* row = r.find(name, key, v);
  if (!row) throw std::runtime_error("missing statistic " + name);
  return row->value;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const char* cli = std::getenv("CUEFIELD_CLI");
    if (!cli) GTEST_SKIP() << "CUEFIELD_CLI not set";
    cli_ = cli;
    dir_ = fs::temp_directory_path() / ("cuefield_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    if (!dir_.empty()) fs::remove_all(dir_);
  }

  fs::path write_config(const std::string& body) {
    fs::path p = dir_ / "config.json";
    std::ofstream(p) << body;
    return p;
  }

  int run(const std::string& args) {
    std::string cmd = "\"" + cli_ + "\" " + args + " > \"" + (dir_ / "stdout.txt").string() + "\" 2> \"" +
                      (dir_ / "stderr.txt").string() + "\"";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }

  std::string read(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  std::string cli_;
  fs::path dir_;
};

}  // namespace

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(validate_config(json{{"bogus", json::object()}}), ConfigError);
  EXPECT_THROW(validate_config(json::array()), ConfigError);
  EXPECT_THROW(run_experiment("moments", json{{"moments", {{"sample", 10}}}}, {}), ConfigError);
  EXPECT_THROW(run_experiment("moments", json{{"moments", {{"n_list", {1}}}}}, {}), ConfigError);
  EXPECT_THROW(run_experiment("moments", json{{"moments", {{"samples", "many"}}}}, {}), ConfigError);
  EXPECT_THROW(run_experiment("nope", json::object(), {}), ConfigError);
}

TEST(Reproducibility, IdenticalAcrossRunsAndWorkers) {
  json cfg{{"toeplitz-verify", {{"instances", 12}}},
           {"moments", {{"n_list", {2, 3}}, {"samples", 3000}, {"chunk", 500}}},
           {"domination", {{"instances", 6}, {"n_max", 10}}},
           {"max-law", {{"n_list", {16, 32}}, {"samples", 12}}},
           {"gaussian-max", {{"n_list", {16, 32}}, {"samples", 12}}},
           {"ballot", {{"n_list", {8}}, {"samples", 20000}, {"chunk", 3000}, {"bridge_samples", 2000}, {"bridge_steps", 16}}},
           {"relaxation", {{"n_list", {32}}, {"configs", 3}, {"grid", 512}}},
           {"biased-mean", {{"N", 32}, {"samples", 2000}, {"control_samples", 4000}, {"chunk", 500}, {"ess_floor", 10.0}}}};
  for (const auto& name : experiment_names()) {
    auto a = run_experiment(name, cfg, {7, 1});
    auto b = run_experiment(name, cfg, {7, 1});
    auto c = run_experiment(name, cfg, {7, 3});
    EXPECT_FALSE(a.failed) << name << ": " << a.error;
    EXPECT_EQ(to_csv(a), to_csv(b)) << name;
    EXPECT_EQ(to_csv(a), to_csv(c)) << name;
    EXPECT_NE(to_csv(a), to_csv(run_experiment(name, cfg, {8, 1}))) << name;
    for (const auto& r : a.rows) EXPECT_NE(r.param_json.find("\"seed\":7"), std::string::npos) << name << " " << r.statistic;
  }
}

TEST(ToeplitzVerify, SeedOneHasNoFailures) {
  auto r = run_experiment("toeplitz-verify", json::object(), {1, 1});
  EXPECT_EQ(stat(r, "corrected_failures"), 0.0);
  EXPECT_GT(stat(r, "corrected_checks"), 1000.0);
  EXPECT_LE(stat(r, "corrected_max_rel_error"), 1e-8);
  EXPECT_EQ(stat(r, "baxter_failures"), 0.0);
  EXPECT_GT(stat(r, "baxter_violation_max_deviation"), 1e-6);
  EXPECT_EQ(stat(r, "two_point_failures"), 0.0);
}

TEST(Moments, TableAtNFour) {
  auto r = run_experiment("moments", json{{"moments", {{"n_list", {4}}, {"samples", 20000}}}}, {3, 1});
  for (int k = 1; k <= 8; ++k) {
    EXPECT_EQ(stat(r, "theory", "k", k), std::min(k, 4));
    EXPECT_LT(std::abs(stat(r, "qr_z", "k", k)), 4.0) << k;
    EXPECT_LT(std::abs(stat(r, "verblunsky_z", "k", k)), 4.0) << k;
    EXPECT_LT(std::abs(stat(r, "mutual_z", "k", k)), 4.0) << k;
  }
}

TEST(Relaxation, NoViolations) {
  auto r = run_experiment("relaxation", json{{"relaxation", {{"n_list", {64}}, {"configs", 10}, {"grid", 4096}}}}, {1, 1});
  EXPECT_EQ(stat(r, "radial_slide_violations"), 0.0);
  EXPECT_EQ(stat(r, "max_inequality_violations"), 0.0);
  EXPECT_GT(stat(r, "radial_slide_checks"), 0.0);
}

TEST(BiasedMean, OriginIsExactlyZero) {
  json cfg{{"biased-mean", {{"N", 64}, {"samples", 5000}, {"control_samples", 20000}, {"ess_floor", 50.0}}}};
  auto r = run_experiment("biased-mean", cfg, {5, 1});
  ASSERT_FALSE(r.failed) << r.error;
  EXPECT_EQ(stat(r, "cue_mean", "i", 0), 0.0);
  EXPECT_EQ(stat(r, "gaussian_exact_mean", "i", 0), 0.0);
  EXPECT_GE(stat(r, "cue_ess"), 50.0);
}

TEST(BiasedMean, EssFloorMarksFailure) {
  json cfg{{"biased-mean", {{"N", 64}, {"samples", 200}, {"control_samples", 200}, {"ess_floor", 1e9}}}};
  auto r = run_experiment("biased-mean", cfg, {5, 1});
  EXPECT_TRUE(r.failed);
  EXPECT_NE(r.error.find("effective sample size"), std::string::npos);
  EXPECT_FALSE(r.rows.empty());
}

TEST(MaxLaw, TwoPhasesMatchBruteForce) {
  // N = 2 eigenvalue density is proportional to |e^{i a} - e^{i b}|^2 <= 4:
  // accept uniform pairs with that probability.
  const double r = 0.9;
  const std::size_t m = 64;
  stats::MeanVar cue, brute;
  Engine eng = make_engine(11, "test");
  for (int s = 0; s < 100000; ++s) cue.add(cue_max_sample(2, r, m, eng));
  Engine ub = make_engine(13, "test");
  while (brute.count() < 100000) {
    double a = 2.0 * pi * uniform01(ub), b = 2.0 * pi * uniform01(ub);
    if (uniform01(ub) * 4.0 > std::norm(std::polar(1.0, a) - std::polar(1.0, b))) continue;
    double best = -1e300;
    for (std::size_t j = 0; j < m; ++j) {
      cplx z = std::polar(r, 2.0 * pi * static_cast<double>(j) / static_cast<double>(m));
      best = std::max(best, std::log(std::abs(1.0 - z * std::polar(1.0, a))) + std::log(std::abs(1.0 - z * std::polar(1.0, b))));
    }
    brute.add(best);
  }
  EXPECT_LE(std::abs(cue.mean() - brute.mean()), 4.0 * std::hypot(cue.std_error(), brute.std_error()));
}

TEST(MaxLaw, RowsAndBeta) {
  auto r = run_experiment("max-law", json{{"max-law", {{"n_list", {32, 64, 128}}, {"samples", 20}}}}, {1, 1});
  EXPECT_GT(stat(r, "mean_max_over_log_n", "N", 128), 0.0);
  EXPECT_TRUE(std::isfinite(stat(r, "beta")));
  EXPECT_EQ(r.find("beta")->samples, 60u);
}

TEST_F(CliTest, WritesCsvAndManifest) {
  auto cfg = write_config(R"({"toeplitz-verify": {"instances": 5}})");
  int rc = run("toeplitz-verify --config \"" + cfg.string() + "\" --seed 9 --workers 2 --out \"" + (dir_ / "out").string() + "\"");
  ASSERT_EQ(rc, 0) << read(dir_ / "stderr.txt");
  std::string csv = read(dir_ / "out" / "toeplitz-verify.csv");
  EXPECT_EQ(csv.rfind("experiment,param_json,statistic,value,std_error,samples\n", 0), 0u);
  EXPECT_EQ(csv, read(dir_ / "stdout.txt"));
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  json m = json::parse(read(dir_ / "out" / "toeplitz-verify.manifest.json"));
  EXPECT_EQ(m["seed"], 9);
  EXPECT_EQ(m["workers"], 2);
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["config"]["toeplitz-verify"]["instances"], 5);
  EXPECT_TRUE(m.contains("wall_time_seconds"));
}

TEST_F(CliTest, SeventeenSignificantDigits) {
  auto cfg = write_config(R"({"moments": {"n_list": [2], "samples": 100}})");
  ASSERT_EQ(run("moments --config \"" + cfg.string() + "\" --out \"" + (dir_ / "out").string() + "\""), 0);
  std::string csv = read(dir_ / "stdout.txt");
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    auto last = line.rfind(',');
    auto prev = line.rfind(',', last - 1);
    auto start = line.rfind(',', prev - 1) + 1;
    double v = std::stod(line.substr(start, prev - start));
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    EXPECT_EQ(line.substr(start, prev - start), buf);
  }
}

TEST_F(CliTest, RejectsBadConfig) {
  auto cfg = write_config(R"({"moments": {"samples": 10, "typo": 1}})");
  EXPECT_EQ(run("moments --config \"" + cfg.string() + "\" --out \"" + (dir_ / "out").string() + "\""), 2);
  EXPECT_NE(read(dir_ / "stderr.txt").find("typo"), std::string::npos);
  auto top = write_config(R"({"momentz": {}})");
  EXPECT_EQ(run("moments --config \"" + top.string() + "\""), 2);
  auto broken = write_config("{");
  EXPECT_EQ(run("moments --config \"" + broken.string() + "\""), 2);
  EXPECT_NE(run("nonexistent --config \"" + top.string() + "\""), 0);
  EXPECT_NE(run("moments"), 0);
}

TEST_F(CliTest, RuntimeFailureFlushesPartialResults) {
  auto cfg = write_config(R"({"biased-mean": {"N": 32, "samples": 100, "control_samples": 100, "ess_floor": 1e9}})");
  EXPECT_EQ(run("biased-mean --config \"" + cfg.string() + "\" --out \"" + (dir_ / "out").string() + "\""), 1);
  json m = json::parse(read(dir_ / "out" / "biased-mean.manifest.json"));
  EXPECT_EQ(m["status"], "failed");
  EXPECT_NE(read(dir_ / "out" / "biased-mean.csv").find("cue_mean"), std::string::npos);
}
