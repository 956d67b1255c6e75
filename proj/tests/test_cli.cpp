#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ostop/cli.hpp"

using namespace ostop;
namespace fs = std::filesystem;

namespace {

const std::string kConfigs = OSTOP_CONFIGS;
const std::string kBin = OSTOP_BIN;

fs::path scratch() {
  auto dir = fs::temp_directory_path() / "ostop_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write(const std::string& name, const std::string& content) {
  const auto p = scratch() / name;
  std::ofstream(p, std::ios::binary) << content;
  return p;
}

/// A config from the shipped examples with the mc table replaced.
fs::path with_mc(const std::string& base, const std::string& name, const std::string& mc) {
  auto json = cli::Json::parse(slurp(kConfigs + "/" + base), nullptr, true, true);
  json["mc"] = cli::Json::parse(mc);
  return write(name, json.dump(2));
}

int shell(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string line; std::getline(ss, line);) out.push_back(line);
  return out;
}

} // namespace

TEST(Solve, CappedCallReport) {
  const auto out = scratch() / "capped.json";
  std::stringstream err;
  ASSERT_EQ(cli::cmd_solve(kConfigs + "/capped_call.json", out.string(), err), 0) << err.str();
  const auto report = cli::Json::parse(slurp(out));
  EXPECT_DOUBLE_EQ(report["y_star"].get<double>(), 5.0);
  EXPECT_NEAR(report["jump_at_threshold"].get<double>(), 2.0, 1e-12);
  bool found = false;
  for (const auto& v : report["values"])
    if (v["x"].get<double>() == 4.0) {
      EXPECT_NEAR(v["V"].get<double>(), 1.28, 1e-10);
      found = true;
    }
  EXPECT_TRUE(found);
  EXPECT_TRUE(report["sufficiency"]["satisfied"].get<bool>());
  EXPECT_TRUE(report["representation_as_expected_sup"].get<bool>());
}

TEST(Solve, OptimalEntryFlagsFailure) {
  const auto out = scratch() / "entry.json";
  std::stringstream err;
  ASSERT_EQ(cli::cmd_solve(kConfigs + "/optimal_entry.json", out.string(), err), 0) << err.str();
  const auto report = cli::Json::parse(slurp(out));
  EXPECT_FALSE(report["representation_as_expected_sup"].get<bool>());
  EXPECT_GT(report["monotone"]["failed_count"].get<std::size_t>(), 0u);
}

TEST(Solve, MalformedConfig) {
  const auto bad = write("bad.json", "{ \"diffusion\": { \"mu\": 1.5x } }");
  std::stringstream err;
  EXPECT_EQ(cli::cmd_solve(bad.string(), (scratch() / "never.json").string(), err), 1);
  EXPECT_NE(err.str().find("at byte"), std::string::npos) << err.str();
  EXPECT_EQ(shell(kBin + " solve " + bad.string()), 1);
}

TEST(Solve, SemanticConfigErrors) {
  const auto bad = write("bad_expr.json", R"({"diffusion": {"mu": "1.5*", "sigma": "x", "interval": [0, "inf"], "r": 4},
                                              "payoff": {"expr": "x-1"}})");
  std::stringstream err;
  EXPECT_EQ(cli::cmd_solve(bad.string(), "", err), 1);
  EXPECT_NE(err.str().find("/diffusion/mu"), std::string::npos) << err.str();
}

TEST(Solve, NoThresholdExitCode) {
  const auto cfg = write("psi.json", R"({"diffusion": {"mu": "1.5*x", "sigma": "x", "interval": [0, "inf"], "r": 4},
                                         "payoff": {"expr": "x^2"}})");
  std::stringstream err;
  EXPECT_EQ(cli::cmd_solve(cfg.string(), "", err), 2);
}

TEST(Curve, CappedCallJump) {
  const auto out = scratch() / "fhat.csv";
  std::stringstream err;
  ASSERT_EQ(cli::cmd_curve(kConfigs + "/capped_call.json", "fhat", 4.0, 6.0, 5, out.string(), err), 0) << err.str();
  const auto rows = lines(slurp(out));
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0], "x,fhat");
  EXPECT_EQ(rows[3], "5,-0.5");
  EXPECT_EQ(rows[4], "5,2");
  EXPECT_EQ(rows[1], "4,-1");
}

TEST(Curve, PsiAndDegenerate) {
  const auto out = scratch() / "psi.csv";
  std::stringstream err;
  ASSERT_EQ(cli::cmd_curve(kConfigs + "/perpetual_call.json", "psi", 0.5, 5.0, 10, out.string(), err), 0);
  const auto rows = lines(slurp(out));
  ASSERT_EQ(rows.size(), 11u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto comma = rows[i].find(',');
    const double x = std::stod(rows[i].substr(0, comma));
    const double v = std::stod(rows[i].substr(comma + 1));
    EXPECT_NEAR(v, x * x, 1e-6 * x * x);
  }
  ASSERT_EQ(cli::cmd_curve(kConfigs + "/perpetual_call.json", "value", 1.0, 3.0, 2, out.string(), err), 0);
  const auto two = lines(slurp(out));
  ASSERT_EQ(two.size(), 3u);
  EXPECT_EQ(two[1], "1,0.25");
  EXPECT_EQ(two[2], "3,2");
}

TEST(Verify, SmokeRun) {
  const auto cfg = with_mc("perpetual_call.json", "smoke.json", R"({"n_paths": 100, "dt": 1e-3, "seed": 7, "x0": 1})");
  const auto out = scratch() / "smoke.csv";
  std::stringstream log;
  std::stringstream err;
  const auto t0 = std::chrono::steady_clock::now();
  const int rc = cli::cmd_verify(cfg.string(), out.string(), std::nullopt, log, err);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_TRUE(rc == 0 || rc == 3) << err.str();
  EXPECT_LT(secs, 1.0);
  const auto rows = lines(slurp(out));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "estimator,mean,std_error,n,dt,seed");
  EXPECT_EQ(rows[1].rfind("sup_form,", 0), 0u);
  EXPECT_NE(rows[1].find(",100,0.001,7"), std::string::npos);
}

TEST(Verify, PerpetualCallWithinTolerance) {
  std::stringstream log;
  std::stringstream err;
  EXPECT_EQ(cli::cmd_verify(kConfigs + "/perpetual_call.json", (scratch() / "call.csv").string(), 42, log, err), 0)
      << log.str() << err.str();
}

TEST(Verify, OptimalEntryReportsDiscrepancy) {
  const auto cfg = with_mc("optimal_entry.json", "entry_mc.json", R"({"n_paths": 20000, "dt": 1e-3, "seed": 42, "x0": 1})");
  std::stringstream log;
  std::stringstream err;
  EXPECT_EQ(cli::cmd_verify(cfg.string(), (scratch() / "entry.csv").string(), std::nullopt, log, err), 3);
  EXPECT_NE(log.str().find("not non-decreasing"), std::string::npos);
  const auto rows = lines(slurp(scratch() / "entry.csv"));
  const double sup = std::stod(rows[1].substr(rows[1].find(',') + 1));
  const double max = std::stod(rows[2].substr(rows[2].find(',') + 1));
  EXPECT_GT(sup, max);
}

TEST(Verify, SeedOverrideAndIdempotence) {
  const auto cfg = with_mc("perpetual_call.json", "seeded.json", R"({"n_paths": 1000, "dt": 1e-3, "seed": 1, "x0": 1})");
  const auto a = scratch() / "a.csv";
  const auto b = scratch() / "b.csv";
  const auto c = scratch() / "c.csv";
  shell(kBin + " --seed 9 verify " + cfg.string() + " -o " + a.string());
  shell(kBin + " verify " + cfg.string() + " --seed 9 -o " + b.string());
  shell(kBin + " verify " + cfg.string() + " -o " + c.string());
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_NE(slurp(a), slurp(c));
  EXPECT_NE(slurp(a).find(",9\n"), std::string::npos);
}

TEST(Index, LinearPayoff) {
  const auto out = scratch() / "index.csv";
  std::stringstream log;
  std::stringstream err;
  ASSERT_EQ(cli::cmd_index(kConfigs + "/index_linear.json", {1.0, 4.0}, std::nullopt, out.string(), log, err), 0);
  const auto rows = lines(slurp(out));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "x,gamma");
  EXPECT_EQ(rows[2], "4,2");
  EXPECT_NE(log.str().find("[2, inf)"), std::string::npos) << log.str();

  std::stringstream log0;
  ASSERT_EQ(cli::cmd_index(kConfigs + "/perpetual_call.json", {}, 0.0, out.string(), log0, err), 0);
  EXPECT_EQ(slurp(out), "x,gamma\n");
  EXPECT_NE(log0.str().find("[2, inf)"), std::string::npos) << log0.str();
}

TEST(LevyRoot, Commands) {
  std::stringstream out;
  std::stringstream err;
  ASSERT_EQ(cli::cmd_levy_root(LevySpec{1.5, 1.0, 0.0, 4.0, DiscreteJumps{}}, out, err), 0);
  EXPECT_EQ(lines(out.str())[0], "rho=2");
  std::stringstream zero;
  ASSERT_EQ(cli::cmd_levy_root(LevySpec{1.5, 1.0, 2.0, 4.0, DiscreteJumps{{0.0}, {1.0}}}, zero, err), 0);
  EXPECT_EQ(lines(zero.str())[0], "rho=2");
  EXPECT_EQ(cli::cmd_levy_root(LevySpec{0.0, 1e-3, 0.0, 100.0, DiscreteJumps{}}, out, err), 2);
  EXPECT_EQ(shell(kBin + " levy-root --mu 1.5 --sigma 1 --r 4"), 0);
  EXPECT_EQ(shell(kBin + " levy-root --mu 0 --sigma 0.001 --r 100"), 2);
  EXPECT_EQ(shell(kBin + " levy-root --mu 0 --sigma 1 --r 1 --lambda 2 --z 0.5 --p 1"), 0);
  EXPECT_EQ(shell(kBin + " levy-root --sigma 1 --r 1"), 1);
}

TEST(Output, LocaleIndependentNumbers) {
  EXPECT_EQ(cli::fmt(0.25), "0.25");
  EXPECT_EQ(cli::fmt(2.0), "2");
  EXPECT_EQ(cli::fmt(-1e-20), "-1e-20");
}
