#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aoi/errors.hpp"
#include "aoi/outputs.hpp"
#include "commands.hpp"
#include "run_config.hpp"

using namespace aoi;
using namespace aoi::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("aoi_lab_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "aoi_lab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> tiny_grid() {
  return {"--set", "t_grid={\"start\":0.5,\"stop\":6.5,\"step\":1.5}", "--set",
          "x_grid={\"start\":0.25,\"stop\":4.25,\"step\":1}", "--set", "delta=1"};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST(GridSpec, Values) {
  EXPECT_EQ((GridSpec{0, 1, 0.25}.values()), (std::vector<double>{0, 0.25, 0.5, 0.75, 1}));
  EXPECT_EQ((GridSpec{0, 10, 0.04}.values().size()), 251u);
  EXPECT_EQ((GridSpec{0.01, 9.99, 0.02}.values().size()), 500u);
  EXPECT_EQ((GridSpec{1, 1, 0.5}.values()), std::vector<double>{1});
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c;
  c.link.kind = LinkKind::CensoredNormal;
  c.correlation.c = std::numeric_limits<double>::infinity();
  c.sweep.c = {0, 1, std::numeric_limits<double>::infinity()};
  c.sweep.link = {LinkKind::ShiftedLognormal};
  c.tau = 0.1;
  c.simulation.seed = 12345678901234ULL;
  const nlohmann::json j = config_to_json(c);
  EXPECT_EQ(config_from_json(j), c);
  EXPECT_EQ(config_from_json(nlohmann::json::parse(j.dump())), c);
  EXPECT_EQ(j["correlation"]["c"], "inf");
}

TEST(RunConfig, MetaJsonFeedsBack) {
  const fs::path dir = scratch("meta");
  const CliResult r = run(concat({"exact", "--out", dir.string(), "--set", "tau=1.5", "--set", "correlation.c=3"}, tiny_grid()));
  ASSERT_EQ(r.code, 0) << r.err;
  const RunConfig first = load_config((dir / "meta.json").string(), {});
  EXPECT_EQ(first.tau, 1.5);
  EXPECT_EQ(first.correlation.c, 3.0);
  EXPECT_EQ(first.output, dir.string());
  const nlohmann::json echoed = nlohmann::json::parse(slurp(dir / "meta.json"))["config"];
  EXPECT_EQ(config_from_json(echoed), first);
  EXPECT_EQ(config_to_json(config_from_json(echoed)), echoed);
}

TEST(RunConfig, Overrides) {
  const RunConfig c = load_config(std::nullopt, {"tau=0.5", "sweep.c=0,1,inf", "sweep.tau=1,2", "sweep.tau=null",
                                                  "link.kind=censored-normal", "correlation.c=null",
                                                  "correlation.kappa=0.2"});
  EXPECT_EQ(c.tau, 0.5);
  ASSERT_EQ(c.sweep.c.size(), 3u);
  EXPECT_TRUE(std::isinf(c.sweep.c[2]));
  EXPECT_EQ(c.link.kind, LinkKind::CensoredNormal);
  EXPECT_FALSE(c.correlation.c.has_value());
  EXPECT_EQ(c.correlation.kappa, 0.2);
  EXPECT_TRUE(c.sweep.tau.empty());
  nlohmann::json t = nlohmann::json::object();
  EXPECT_THROW(apply_override(t, "noequals"), ConfigError);
  apply_override(t, "quadrature.rule=trapezoid");
  EXPECT_EQ(t["quadrature"]["rule"], "trapezoid");
}

TEST(RunConfig, Validation) {
  EXPECT_THROW(load_config(std::nullopt, {"bogus=1"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"tau=-1"}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {"t_grid.step=0"}), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json", {}), ConfigError);
  EXPECT_NO_THROW(load_config(std::nullopt, {"correlation.kappa=0.081"}));
}

TEST(ResolveModel, Labels) {
  RunConfig c;
  ResolvedModel r = resolve_model(c);
  EXPECT_EQ(r.c_label, "10");
  EXPECT_EQ(r.model.correlation.kind, CorrelationKind::Ou);
  EXPECT_NEAR(r.s, 0.75, 1e-12);
  EXPECT_NEAR(marginal_moments(r.model.link).mean, 1.0, 1e-8);
  c.correlation.c = 0;
  EXPECT_EQ(resolve_model(c).c_label, "0");
  EXPECT_EQ(resolve_model(c).model.correlation.kind, CorrelationKind::Iid);
  c.correlation.c = std::numeric_limits<double>::infinity();
  EXPECT_EQ(resolve_model(c).c_label, "inf");
  EXPECT_EQ(resolve_model(c).model.correlation.kind, CorrelationKind::Frozen);
  c = load_config(std::nullopt, {"link.mu_hat=0.452", "link.s_hat=1.312", "correlation.kappa=0.081"});
  r = resolve_model(c);
  EXPECT_EQ(r.c_label, "");
  EXPECT_EQ(r.model.link.mu_hat, 0.452);
  EXPECT_EQ(r.model.correlation.kappa, 0.081);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"exact", "--set", "nope=1"}).code, kExitUsage);
  EXPECT_EQ(run({"exact", "--threads", "0"}).code, kExitUsage);
}

TEST(Cli, CalibrationFailure) {
  const CliResult r = run({"calibrate", "--out", scratch("calfail").string(), "--set", "link.s=0"});
  EXPECT_EQ(r.code, kExitCalibration);
  EXPECT_NE(r.err.find("calibration"), std::string::npos);
}

TEST(Cli, CalibrateWritesParameters) {
  const fs::path dir = scratch("cal");
  const CliResult r = run({"calibrate", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(dir / "calibration.json"));
  const auto [mu_hat, s_hat] = calibrate_marginal({1, 0.75, 0.5}, LinkKind::ShiftedLognormal);
  EXPECT_NEAR(j["mu_hat"].get<double>(), mu_hat, 1e-12);
  EXPECT_NEAR(j["s_hat"].get<double>(), s_hat, 1e-12);
  EXPECT_TRUE(fs::exists(dir / "meta.json"));
}

TEST(Cli, EvaluationFailureOnUnwritableOutput) {
  const fs::path blocker = scratch("blocker");
  std::ofstream(blocker) << "file";
  const CliResult r = run(concat({"exact", "--out", (blocker / "sub").string()}, tiny_grid()));
  EXPECT_EQ(r.code, kExitEvaluation);
  fs::remove(blocker);
}

TEST(Cli, ExactTinyIidGridByHand) {
  const fs::path dir = scratch("exact_iid");
  const CliResult r = run(concat({"exact", "--out", dir.string(), "--set", "correlation.c=0"}, tiny_grid()));
  ASSERT_EQ(r.code, 0) << r.err;
  const RunConfig c = load_config((dir / "meta.json").string(), {});
  const DelayModel m = resolve_model(c).model;
  std::istringstream csv(slurp(dir / "ccdf.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "t,x,ccdf");
  int rows = 0;
  for (double t : c.t_grid.values()) {
    for (double x : c.x_grid.values()) {
      ASSERT_TRUE(std::getline(csv, line));
      double tv, xv, pv;
      ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf", &tv, &xv, &pv), 3);
      EXPECT_EQ(tv, t);
      EXPECT_EQ(xv, x);
      // Product of independent per-packet tails.
      double expected = 1;
      const auto td = decompose_time(t, c.tau);
      if (x >= td.phi)
        for (long i = theta(t, x, c.tau); i <= td.k; ++i)
          expected *= 0.5 * std::erfc(g_inverse(m.link, static_cast<double>(td.k - i) * c.tau + td.phi) / std::sqrt(2.0));
      EXPECT_NEAR(pv, expected, 1e-11 * std::max(1.0, expected)) << t << " " << x;
      ++rows;
    }
  }
  EXPECT_EQ(rows, 25);
  for (const char* f : {"heatmap.csv", "timeavg.csv", "percentiles.csv", "meta.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(slurp(dir / "timeavg.csv").substr(0, 11), "x,ccdf_avg\n");
  EXPECT_EQ(slurp(dir / "percentiles.csv").substr(0, 30), "link,c,tau,s,p10,p25,p50,p75,p");
}

TEST(Cli, OutputsIdenticalAcrossThreadCounts) {
  const fs::path a = scratch("threads1"), b = scratch("threads3");
  for (const auto& cmd : {"exact", "simulate"}) {
    const auto extra = std::vector<std::string>{"--set", "simulation.n_paths=3000", "--set", "simulation.sample_paths=5"};
    ASSERT_EQ(run(concat(concat({cmd, "--out", a.string(), "--threads", "1"}, tiny_grid()), extra)).code, 0);
    ASSERT_EQ(run(concat(concat({cmd, "--out", b.string(), "--threads", "3"}, tiny_grid()), extra)).code, 0);
    for (const char* f : {"ccdf.csv", "heatmap.csv", "timeavg.csv", "percentiles.csv", "stderr.csv", "paths.csv"}) {
      if (!fs::exists(a / f)) continue;
      EXPECT_EQ(slurp(a / f), slurp(b / f)) << cmd << " " << f;
    }
  }
}

TEST(Cli, CompareExitCodes) {
  const auto base = concat({"compare", "--out", scratch("compare").string(), "--set", "simulation.n_paths=20000"},
                           tiny_grid());
  const CliResult ok = run(base);
  EXPECT_EQ(ok.code, kExitOk) << ok.err;
  const CliResult strict = run(concat(base, {"--set", "compare.z_max=1e-9", "--set", "compare.z_fraction=1"}));
  EXPECT_EQ(strict.code, kExitAcceptance);
}

TEST(Cli, PartialSweep) {
  const fs::path dir = scratch("sweep_partial");
  // The second s is infeasible for calibration; the first row still gets written.
  const CliResult r = run({"sweep", "--out", dir.string(), "--set", "sweep.s=0.75,-1", "--set", "sweep.c=0"});
  EXPECT_EQ(r.code, kExitPartialSweep);
  std::istringstream csv(slurp(dir / "percentiles.csv"));
  std::string line;
  int n = 0;
  while (std::getline(csv, line)) ++n;
  EXPECT_EQ(n, 2);
}

TEST(Sweep, SinglePointMatchesLibraryPercentiles) {
  RunConfig c = load_config(std::nullopt, {"sweep.c=3", "tau=1"});
  const SweepResult res = run_sweep(c, 1);
  ASSERT_EQ(res.rows.size(), 1u);
  ASSERT_TRUE(res.failures.empty());
  c.correlation.c = 3;
  const PercentileRow row = percentiles(resolve_model(c).model, c.levels);
  EXPECT_EQ(res.rows[0].values, row.values);
  EXPECT_EQ(res.rows[0].c, "3");
  EXPECT_EQ(res.rows[0].tau, 1.0);
}

TEST(Sweep, CorrelationBoundsAndTauOrdering) {
  const RunConfig c = load_config(std::nullopt, {"sweep.c=0,1,10,inf", "sweep.tau=0.5,1,2"});
  const SweepResult res = run_sweep(c, 1);
  ASSERT_EQ(res.rows.size(), 12u);
  // Rows: tau outer, c inner.
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t k = 0; k + 1 < 4; ++k)
      for (std::size_t l = 0; l < 5; ++l)
        EXPECT_LE(res.rows[4 * t + k].values[l], res.rows[4 * t + k + 1].values[l] + 1e-5);
  }
  // iid: the median grows with the generation interval.
  EXPECT_LT(res.rows[0].values[2], res.rows[4].values[2]);
  EXPECT_LT(res.rows[4].values[2], res.rows[8].values[2]);
}
