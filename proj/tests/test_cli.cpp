#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include "drbm/commands.hpp"

using namespace drbm;
using cli::json;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = std::filesystem::temp_directory_path() / ("drbm_cli_" + std::string(info->name()));
    std::filesystem::remove_all(root_);
  }
  void TearDown() override { std::filesystem::remove_all(root_); }

  int run(const std::string& command, const json& user, const std::filesystem::path& out, bool dry = false) {
    log_.str("");
    err_.str("");
    cli::RunContext ctx;
    ctx.out = out;
    ctx.dry_run = dry;
    ctx.log = &log_;
    try {
      return cli::run_guarded(command, cli::resolve_config(command, user), ctx, err_);
    } catch (const ConfigError& e) {
      err_ << e.what();
      return cli::kExitConfigError;
    }
  }

  std::filesystem::path root_;
  std::ostringstream log_, err_;
};

}  // namespace

TEST(Io, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double x = u(rng) * std::pow(10.0, (i % 40) - 20);
    EXPECT_EQ(std::stod(io::format_double(x)), x);
  }
  EXPECT_EQ(io::format_double(0.1), "0.1");
}

TEST(Io, MeasureJsonRoundTrips) {
  const auto disk = MeasureSpec::uniform_disk({0.5, -0.25}, 0.75, 2.0);
  const auto rect = MeasureSpec::uniform_rect({-1.0, 1.0, 0.0, 0.5}, 1.5);
  const auto bump = MeasureSpec::gaussian_bump({0.0, 0.1}, 0.2, 3.0);
  const auto mix = MeasureSpec::linear_combination({{2.0, disk}, {0.5, rect}, {1.0, bump}});
  for (const auto& mu : {disk, rect, bump, mix}) {
    const auto back = io::measure_from_json(io::measure_to_json(mu));
    EXPECT_EQ(back.describe(), mu.describe());
    EXPECT_DOUBLE_EQ(back.ball_mass({0.1, 0.2}, 0.6), mu.ball_mass({0.1, 0.2}, 0.6));
  }
  EXPECT_THROW(io::measure_from_json(json{{"kind", "uniform_disk"}, {"center", {0, 0}}, {"radius", -1}, {"mass", 1}}),
               ConfigError);
  EXPECT_THROW(io::measure_from_json(json{{"kind", "blob"}}), ConfigError);
  const auto samples = std::vector<double>{1.5, -2.25e-7, 3.0};
  EXPECT_EQ(io::parse_samples_csv(io::samples_csv(samples)), samples);
}

TEST(Config, DefaultsAreEchoedAndUnknownKeysRejected) {
  for (const auto& name : cli::command_names()) {
    const auto cfg = cli::resolve_config(name, json::object());
    EXPECT_EQ(cfg, cli::default_config(name));
    EXPECT_EQ(cfg["schema_version"], io::kSchemaVersion);
  }
  EXPECT_THROW(cli::resolve_config("sample", {{"replicats", 3}}), ConfigError);
  EXPECT_THROW(cli::resolve_config("sample", {{"schema_version", 99}}), ConfigError);
  EXPECT_THROW(cli::resolve_config("sample", {{"command", "regime"}}), ConfigError);
  EXPECT_THROW(cli::resolve_config("regime", {{"oracle", {{"drawz", 3}}}}), ConfigError);
  EXPECT_THROW(cli::resolve_config("plot", json::object()), ConfigError);
  const auto merged = cli::resolve_config("regime", {{"oracle", {{"draws", 77}}}});
  EXPECT_EQ(merged["oracle"]["draws"], 77);
  EXPECT_EQ(merged["oracle"]["max_expected_atoms"], 2e4);
}

TEST_F(CliTest, SampleIsByteIdenticalAndCreatesDirectories) {
  const json cfg{{"replicates", 3}, {"marks", {{"rho", 0.3}, {"law", {{"beta", 3.0}, {"r0", 1.0}}}}}};
  ASSERT_EQ(run("sample", cfg, root_ / "a" / "nested"), 0) << err_.str();
  ASSERT_EQ(run("sample", cfg, root_ / "b"), 0);
  const auto a = io::read_file(root_ / "a" / "nested" / "marked.csv");
  EXPECT_EQ(a, io::read_file(root_ / "b" / "marked.csv"));
  EXPECT_EQ(a.substr(0, a.find('\n')), "replicate_id,re,im,radius");
  const auto summary = io::read_json(root_ / "b" / "summary.json");
  EXPECT_EQ(summary["replicates"].size(), 3u);
  EXPECT_EQ(summary["replicates"][0]["window"]["shape"], "disk");

  // re-running from the echoed config reproduces the files
  ASSERT_EQ(run("sample", io::read_json(root_ / "b" / "run.json"), root_ / "c"), 0);
  EXPECT_EQ(a, io::read_file(root_ / "c" / "marked.csv"));
}

TEST_F(CliTest, InadmissibleParametersNameTheirConstraint) {
  EXPECT_EQ(run("sample", {{"marks", {{"rho", 0.3}, {"law", {{"beta", 5.0}}}}}}, root_), 2);
  EXPECT_NE(err_.str().find("(2,4)"), std::string::npos) << err_.str();
  EXPECT_EQ(run("sample", {{"alpha", 1.5}}, root_), 2);
  EXPECT_NE(err_.str().find("(0,1]"), std::string::npos) << err_.str();
  EXPECT_EQ(run("regime", {{"regime", {{"kind", "intermediate"}, {"a", 0.0}, {"beta", 3.0}}}}, root_), 2);
  EXPECT_NE(err_.str().find("a must be > 0"), std::string::npos) << err_.str();
  EXPECT_EQ(run("regime", {{"regime", {{"kind", "small_ball"}, {"delta", 1.0}, {"beta", 4.0}}}}, root_), 2);
  EXPECT_NE(err_.str().find("(2,4)"), std::string::npos);
  EXPECT_EQ(run("oracle", {{"beta", 2.0}}, root_), 2);
  EXPECT_FALSE(std::filesystem::exists(root_));
}

TEST_F(CliTest, RegimeDryRunResumeAndBudget) {
  const json cfg{{"rho", {0.4, 0.3}}, {"replicates", 120}, {"oracle", {{"draws", 500}, {"max_expected_atoms", 2000}}}};
  ASSERT_EQ(run("regime", cfg, root_ / "dry", true), 0);
  EXPECT_NE(log_.str().find("15.625"), std::string::npos) << log_.str();
  EXPECT_FALSE(std::filesystem::exists(root_ / "dry"));

  const auto out = root_ / "run";
  const int code = run("regime", cfg, out);
  EXPECT_TRUE(code == 0 || code == 1);
  const auto p0 = io::read_file(out / "point_0.csv");
  const auto p1 = io::read_file(out / "point_1.csv");
  const auto verdict = io::read_json(out / "verdict.json");
  EXPECT_EQ(verdict["points"].size(), 2u);
  EXPECT_EQ(verdict["oracle"]["source"], "oracle");

  std::filesystem::remove(out / "point_1.csv");
  EXPECT_EQ(run("regime", cfg, out), code);
  EXPECT_NE(log_.str().find("point 0: reusing"), std::string::npos);
  EXPECT_NE(log_.str().find("point 1: sampled"), std::string::npos);
  EXPECT_EQ(io::read_file(out / "point_0.csv"), p0);
  EXPECT_EQ(io::read_file(out / "point_1.csv"), p1);

  auto other = cfg;
  other["seed"] = 2;
  EXPECT_EQ(run("regime", other, out), 2);
  EXPECT_NE(err_.str().find("different run"), std::string::npos);

  const json big{{"regime", {{"kind", "large_ball"}, {"delta", 1.0}, {"beta", 3.0}}}, {"rho", {0.2, 0.01}}};
  EXPECT_EQ(run("regime", big, root_ / "big", true), 2);
  EXPECT_NE(err_.str().find("budget"), std::string::npos) << err_.str();
}

TEST_F(CliTest, KFunctionSpectrumLaplaceAndOracleReports) {
  ASSERT_EQ(run("kfunction", {{"replicates", 200}}, root_ / "k"), 0) << log_.str();
  const auto k = io::read_file(root_ / "k" / "kfunction.csv");
  EXPECT_EQ(k.substr(0, k.find('\n')), "r,k_hat,k_theoretical,gap,band");

  ASSERT_EQ(run("spectrum", json::object(), root_ / "s"), 0);
  const auto s = io::read_json(root_ / "s" / "spectrum.json");
  EXPECT_LT(s["lambda_max"].get<double>(), 1.0);
  EXPECT_LT(s["trace_relative_error"].get<double>(), 1e-4);

  ASSERT_EQ(run("laplace", {{"mc_replicates", 4000}}, root_ / "l"), 0) << log_.str();
  const auto l = io::read_json(root_ / "l" / "laplace.json");
  ASSERT_EQ(l["rows"].size(), 3u);
  for (const auto& row : l["rows"]) {
    EXPECT_TRUE(row.contains("fredholm"));
    EXPECT_TRUE(row.contains("monte_carlo"));
  }

  for (const auto* kind : {"gaussian", "poisson", "stable"}) {
    const auto dir = root_ / kind;
    ASSERT_EQ(run("oracle", {{"kind", kind}, {"draws", 300}, {"max_expected_atoms", 2000}}, dir), 0) << err_.str();
    EXPECT_EQ(io::parse_samples_csv(io::read_file(dir / "oracle.csv")).size(), 300u);
    EXPECT_EQ(io::read_json(dir / "oracle.json")["source"], "oracle");
  }
}

TEST_F(CliTest, SmallBallComparisonAddsBackTheTruncatedJumps) {
  const json cfg{{"regime", {{"kind", "small_ball"}, {"delta", 1.0}, {"beta", 3.0}}},
                 {"rho", {0.3}},
                 {"replicates", 300},
                 {"tail_window", {0.9, 0.99}},
                 {"oracle", {{"draws", 500}}}};
  const int code = run("regime", cfg, root_);
  EXPECT_TRUE(code == 0 || code == 1) << err_.str();
  const auto verdict = io::read_json(root_ / "verdict.json");
  // (E M - E M^R) / n_rho = c rho^3 pi / R / rho^{2/3} with c rho^3 = rho, R = 1
  EXPECT_NEAR(verdict["points"][0]["compensator"].get<double>(), kPi * std::cbrt(0.3), 1e-12);
  EXPECT_TRUE(verdict.contains("tail_index"));
}
