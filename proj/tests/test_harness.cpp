#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "trisleo/cli.hpp"
#include "trisleo/oracle.hpp"

using namespace trisleo;
namespace fs = std::filesystem;

#ifndef TRISLEO_CONFIG_DIR
#define TRISLEO_CONFIG_DIR "configs"
#endif

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("trisleo_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string config_without(const std::string& key) {
  std::istringstream in(to_config_text(Scenario{}));
  std::string out, line;
  while (std::getline(in, line))
    if (line.rfind(key + " =", 0) != 0) out += line + '\n';
  return out;
}

int cli(std::vector<std::string> args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int rc = run_cli(args, out, err);
  if (err_text) *err_text = err.str();
  return rc;
}

}  // namespace

TEST(Config, MissingKeyIsNamed) {
  std::istringstream in(config_without("i_th"));
  try {
    parse_config(in);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "i_th");
  }
}

TEST(Config, BadValuesAreNamed) {
  for (const auto& [key, bad] : std::vector<std::pair<std::string, std::string>>{
           {"p_max", "-1"}, {"sigma_sq", "0"}, {"m_elements", "2.5"}, {"r_min", "abc"}, {"seed", "-3"}}) {
    std::istringstream in(config_without(key) + key + " = " + bad + "\n");
    try {
      parse_config(in);
      ADD_FAILURE() << key << " accepted " << bad;
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.key(), key);
    }
  }
}

TEST(Config, UnknownAndDuplicateKeys) {
  std::istringstream a(to_config_text(Scenario{}) + "bogus = 1\n");
  EXPECT_THROW(parse_config(a), ConfigError);
  std::istringstream b(to_config_text(Scenario{}) + "p_max = 2\n");
  EXPECT_THROW(parse_config(b), ConfigError);
}

TEST(Config, TextRoundTrip) {
  Scenario sc;
  sc.m_elements = 7;
  sc.cons.r_min = 0.37;
  sc.seed = 123456789;
  std::istringstream in(to_config_text(sc));
  const Scenario back = parse_config(in);
  EXPECT_EQ(to_config_text(back), to_config_text(sc));
}

TEST(Config, ShippedDefaultsMatchBuiltIns) {
  const Scenario file = load_config(std::string(TRISLEO_CONFIG_DIR) + "/defaults.conf");
  const Scenario built;
  EXPECT_EQ(file.m_elements, 10);
  EXPECT_EQ(file.cons.i_th, 2.0);
  EXPECT_EQ(file.cons.r_min, 0.1);
  EXPECT_EQ(file.noise.sigma_sq, 1e-7);
  EXPECT_EQ(to_config_text(file), to_config_text(built));
}

TEST(AlternatingOptimize, DefaultScenarioConvergesWithInvariants) {
  const Scenario sc;
  const AoResult r = alternating_optimize(sc);
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(r.feasible);
  EXPECT_LE(r.iterations, 10);
  EXPECT_EQ(check_invariants(r, sc), "");
  for (const IterationTrace& t : r.trace) EXPECT_LE(t.interference, sc.cons.i_th + 1e-6);
}

TEST(AlternatingOptimize, SingleElementMatchesClosedFormChain) {
  // With one element the beam only scales the channels, so the best point uses
  // the full amplitude and the power follows from a direct grid search.
  Scenario sc;
  sc.m_elements = 1;
  sc.cons.r_min = 0.0;
  sc.aod_spread_rad = 0.0;
  sc.geom_k.path_gain = 1e-3;
  sc.geom_j.path_gain = 4e-4;
  const AoResult r = alternating_optimize(sc);
  ASSERT_TRUE(r.feasible);
  const double gk = 1e-6, gj = 1.6e-7, h = sc.geom_l.path_gain * sc.geom_l.path_gain;
  const double pt = std::min(sc.cons.p_max, sc.cons.i_th / h);
  double best = 0;
  for (int i = 0; i <= 100000; ++i) {
    const double pk = i / 100000.0;
    best = std::max(best, oracle::rate_strong(gk, pk, pt, 1e-7) + oracle::rate_weak(gj, pk, pt, 1e-7));
  }
  EXPECT_NEAR(r.final_point.sum_rate, best, 1e-4);
  EXPECT_NEAR(r.final_point.p_t, pt, 1e-9);
  EXPECT_EQ(check_invariants(r, sc), "");
}

TEST(AlternatingOptimize, IdenticalUserChannels) {
  Scenario sc;
  std::mt19937_64 rng(sc.seed);
  ChannelSet ch = draw_channels(sc, rng);
  ch.g_j = ChannelVector{ch.g_k.gains, ReceiverId::user_j};
  sc.cons.r_min = 0.05;
  const AoResult r = alternating_optimize(sc, ch, 3, ao_options_for(sc));
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(check_invariants(r, sc), "");
}

TEST(AlternatingOptimize, UnreachableFloorReportsBinding) {
  Scenario sc;
  sc.cons.r_min = 40.0;
  const AoResult r = alternating_optimize(sc);
  EXPECT_FALSE(r.feasible);
  EXPECT_FALSE(r.binding_constraint.empty());
  EXPECT_EQ(check_invariants(r, sc), "");
}

TEST(Sweep, GridValidation) {
  EXPECT_THROW(sweep(Scenario{}, SweepVariable::p_max, {}, 1), InvalidInput);
  EXPECT_THROW(sweep(Scenario{}, SweepVariable::p_max, {1.0, 1.0}, 1), InvalidInput);
  EXPECT_THROW(with_value(Scenario{}, SweepVariable::m_elements, 2.5), InvalidInput);
}

TEST(Sweep, SmallPmaxSweepIsDeterministicAndMonotone) {
  Scenario sc;
  sc.m_elements = 4;
  const auto grid = linear_grid(0.2, 3.0, 5);
  const SweepResult a = sweep(sc, SweepVariable::p_max, grid, 3);
  const SweepResult b = sweep(sc, SweepVariable::p_max, grid, 3);
  std::ostringstream ca, cb;
  write_sweep_csv(ca, a);
  write_sweep_csv(cb, b);
  EXPECT_EQ(ca.str(), cb.str());
  const auto rates = a.mean_sum_rates();
  for (std::size_t i = 1; i < rates.size(); ++i) EXPECT_GE(rates[i], rates[i - 1] - 1e-3);
  for (const SweepPoint& p : a.points)
    for (const TrialOutcome& t : p.trials) EXPECT_EQ(t.invariant_failure, "");
}

TEST(Cli, SolveWritesTraceAndSummary) {
  const fs::path d = scratch_dir("solve");
  ASSERT_EQ(cli({"solve", "--config", "defaults", "--out", d.string()}), kExitOk);
  const std::string trace = slurp(d / "trace.csv");
  EXPECT_EQ(trace.substr(0, trace.find('\n')), "iter,sum_rate,p_k,P_t,interference,delta");
  const auto j = nlohmann::json::parse(slurp(d / "summary.json"));
  for (const char* k : {"sum_rate", "iterations", "feasible", "p_k", "p_t"}) EXPECT_TRUE(j.contains(k)) << k;
}

TEST(Cli, SolveIsByteIdenticalAcrossRuns) {
  const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  ASSERT_EQ(cli({"solve", "--seed", "17", "--out", a.string()}), kExitOk);
  ASSERT_EQ(cli({"solve", "--seed", "17", "--out", b.string()}), kExitOk);
  EXPECT_EQ(slurp(a / "trace.csv"), slurp(b / "trace.csv"));
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
}

TEST(Cli, SweepWritesOneRowPerPoint) {
  const fs::path d = scratch_dir("sweep");
  ASSERT_EQ(cli({"sweep", "--sweep", "p_max:0.1:10:20", "--trials", "1", "--out", d.string()}), kExitOk);
  std::istringstream csv(slurp(d / "sweep_p_max.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line.substr(0, 6), "p_max,");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 20);
}

TEST(Cli, InfeasibleScenarioExitsOne) {
  const fs::path d = scratch_dir("infeasible");
  std::ofstream(d / "hard.conf") << config_without("r_min") << "r_min = 40\n";
  EXPECT_EQ(cli({"solve", "--config", (d / "hard.conf").string(), "--out", d.string()}), kExitInfeasible);
}

TEST(Cli, InvalidConfigExitsTwoAndNamesKey) {
  const fs::path d = scratch_dir("invalid");
  std::ofstream(d / "bad.conf") << config_without("sigma_sq");
  std::string err;
  EXPECT_EQ(cli({"solve", "--config", (d / "bad.conf").string(), "--out", d.string()}, &err), kExitInvalid);
  EXPECT_NE(err.find("sigma_sq"), std::string::npos) << err;
  EXPECT_EQ(cli({"solve", "--config", (d / "missing.conf").string()}), kExitInvalid);
  EXPECT_EQ(cli({"sweep", "--sweep", "p_max:1:0.5:3"}, &err), kExitInvalid);
  EXPECT_EQ(cli({"frobnicate"}), kExitInvalid);
}

TEST(Cli, SelftestPasses) {
  std::ostringstream out, err;
  EXPECT_EQ(run_cli({"selftest"}, out, err), kExitOk) << out.str();
  EXPECT_EQ(out.str().find("FAIL"), std::string::npos) << out.str();
}
