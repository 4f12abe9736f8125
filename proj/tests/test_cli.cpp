#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "trotterfx/experiment.hpp"

using namespace trotterfx;
using namespace trotterfx::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("trotterfx_cli_" + name);
  fs::remove_all(p);
  return p;
}

int config_error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

const char* tfim_spectrum = R"(command: spectrum
model:
  kind: tfim
  n_sites: 3
params:
  dt: 0.05
)";

}  // namespace

TEST(Cli, ParsesFig1Config) {
  const auto c = load_config(fs::path(TROTTERFX_CONFIG_DIR) / "das_sweep_tfim8.yaml", "das-sweep");
  EXPECT_EQ(c.command, "das-sweep");
  EXPECT_EQ(c.model.kind, "tfim");
  EXPECT_EQ(c.model.n_sites, 8);
  EXPECT_EQ(c.params["M"].get<long long>(), 2000);
  const auto T = c.params["T"].get<std::vector<double>>();
  ASSERT_EQ(T.size(), 50u);
  EXPECT_EQ(T.front(), 40.0);
  EXPECT_EQ(T.back(), 2000.0);
  EXPECT_NEAR(T[1] - T[0], 40.0, 1e-12);
}

TEST(Cli, ShippedConfigsParse) {
  for (const auto& entry : fs::directory_iterator(TROTTERFX_CONFIG_DIR)) {
    if (entry.path().extension() != ".yaml") continue;
    EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
  }
}

TEST(Cli, RejectsUnknownKey) {
  const std::string text = std::string(tfim_spectrum) + "  foo: 1\n";
  try {
    parse_config(text);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'foo'"), std::string::npos);
    EXPECT_EQ(e.line(), 7);
  }
  EXPECT_EQ(config_error_line("command: spectrum\nfoo: 2\nmodel: {kind: tfim, n_sites: 2}\n"), 2);
}

TEST(Cli, RangeAndSyntaxErrors) {
  try {
    parse_config("command: spectrum\nmodel: {kind: tfim, n_sites: 3}\nparams:\n  dt: -0.1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("out of range"), std::string::npos);
    EXPECT_EQ(e.line(), 4);
  }
  EXPECT_EQ(config_error_line("command: spectrum\nmodel: [unclosed\n"), 3);
  EXPECT_THROW(parse_config("command: spectrum\nmodel: {kind: tfim, n_sites: 13}\nparams: {dt: 0.1}\n"), ConfigError);
  EXPECT_THROW(parse_config("command: spectrum\nmodel: {kind: tfim, n_sites: 3}\n"), ConfigError);
  EXPECT_THROW(parse_config("command: spectrum\nmodel: {kind: tfim, n_sites: 3}\nparams: {dt: .nan}\n"), ConfigError);
  EXPECT_THROW(parse_config("command: das-sweep\nmodel: {kind: tfim, n_sites: 3}\nparams: {M: 0, T: [1, 2, 3]}\n"),
               ConfigError);
  EXPECT_THROW(parse_config("command: das-sweep\nmodel: {kind: tfim, n_sites: 3}\nparams: {M: 9, T: [1, 3, 2]}\n"),
               ConfigError);
  EXPECT_THROW(parse_config("command: das-sweep\nmodel: {kind: heisenberg_ff, n_sites: 3}\nparams: {M: 9, T: [1, 2]}\n"),
               ConfigError);
  EXPECT_THROW(parse_config("command: qpe\nmodel: {kind: tfim, n_sites: 2}\nparams: {dt: 0.1, t0: 1, l: 21}\n"),
               ConfigError);
  EXPECT_THROW(parse_config("command: leakage\nmodel: {kind: tfim, n_sites: 2}\nparams: {dt: 0.1, L: 3, subspace: [0, 4]}\n"),
               ConfigError);
  EXPECT_THROW(parse_config("command: spectrum\nmodel: {kind: explicit, n_sites: 2, terms: [[1.0, XQ, 0]]}\nparams: {dt: 0.1}\n"),
               ConfigError);
  // command on the command line must agree with the document
  EXPECT_THROW(parse_config(tfim_spectrum, "qpe"), ConfigError);
  EXPECT_NO_THROW(parse_config(tfim_spectrum, "spectrum"));
}

TEST(Cli, TrotterErrorZeroSteps) {
  const auto c = parse_config("command: trotter-error\nmodel: {kind: tfim, n_sites: 3}\nparams: {dt: 0.1, L: 0}\n");
  const Artifacts a = execute(c);
  ASSERT_EQ(a.table.rows.size(), 1u);
  EXPECT_EQ(to_csv(a.table), "L,t,f,theta,delta,euclid,phase_may_wrap\n0,0,0,0,0,0,0\n");
}

TEST(Cli, BoundsReportTc) {
  const auto c = load_config(fs::path(TROTTERFX_CONFIG_DIR) / "bounds_tfim4.yaml");
  const Artifacts a = execute(c);
  const auto pair = tfim_pair(4);
  const auto pc = interaction_constants(pair.initial, pair.final);
  const double expect = 2.0 * 2000 * pc.D / (3.0 * pc.C1);
  EXPECT_NEAR(a.summary["T_c"].get<double>(), expect, 1e-12 * expect);
  bool found = false;
  for (const auto& r : a.summary["reports"]) {
    if (r["name"] == "tc_optimal") {
      found = true;
      EXPECT_EQ(r["inputs"]["T_c"].get<double>(), a.summary["T_c"].get<double>());
    }
  }
  EXPECT_TRUE(found);
}

TEST(Cli, DasSweepArtifacts) {
  const auto c = load_config(fs::path(TROTTERFX_CONFIG_DIR) / "das_sweep_tfim4.yaml");
  const fs::path out = scratch("das");
  std::ostringstream log;
  ASSERT_EQ(run(c, out, log), exit_ok) << log.str();
  const std::string csv = slurp(out / "das_tfim4.csv");
  EXPECT_EQ(csv.rfind("T,M,eps_adb_d,eps_tro,eps_tot_d,eps_dis_proxy\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 26);
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  const json summary = json::parse(slurp(out / "das_tfim4.summary.json"));
  EXPECT_TRUE(summary.contains("turning_point_T"));
  EXPECT_TRUE(summary.contains("slope_adb"));
  const json manifest = json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["version"], version);
  EXPECT_EQ(manifest["config"]["params"]["M"], 200);
  EXPECT_TRUE(manifest.contains("wall_time_s"));
  fs::remove_all(out);
}

TEST(Cli, RoundTrippableNumbers) {
  Table t{{"x"}, {{0.1}, {1.0 / 3.0}, {2e-300}}};
  std::istringstream in(to_csv(t));
  std::string line;
  std::getline(in, line);
  for (const auto& row : t.rows) {
    std::getline(in, line);
    EXPECT_EQ(std::stod(line), std::get<double>(row[0]));
  }
}

TEST(Cli, DeterministicAcrossRunsAndThreads) {
  const auto c = parse_config(
      "command: trotter-error\nseed: 99\nmodel: {kind: random_real, n_sites: 3}\n"
      "params: {dt: 0.07, L: [1, 5, 20], state: random}\n");
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  std::ostringstream log;
  ASSERT_EQ(run(c, a, log), exit_ok);
  setenv("TROTTERFX_THREADS", "4", 1);
  ASSERT_EQ(run(c, b, log), exit_ok);
  unsetenv("TROTTERFX_THREADS");
  EXPECT_EQ(slurp(a / "result.csv"), slurp(b / "result.csv"));
  EXPECT_EQ(slurp(a / "result.summary.json"), slurp(b / "result.summary.json"));

  const auto d = load_config(fs::path(TROTTERFX_CONFIG_DIR) / "das_sweep_tfim4.yaml");
  ASSERT_EQ(run(d, a, log), exit_ok);
  setenv("TROTTERFX_THREADS", "3", 1);
  ASSERT_EQ(run(d, b, log), exit_ok);
  unsetenv("TROTTERFX_THREADS");
  EXPECT_EQ(slurp(a / "das_tfim4.csv"), slurp(b / "das_tfim4.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, SeedsAreDerivedStably) {
  EXPECT_EQ(derive_seed(7, "model"), derive_seed(7, "model"));
  EXPECT_NE(derive_seed(7, "model"), derive_seed(7, "state"));
  EXPECT_NE(derive_seed(7, "model"), derive_seed(8, "model"));
  const auto c = parse_config("command: spectrum\nseed: 7\nmodel: {kind: random_real, n_sites: 2}\nparams: {dt: 0.1}\n");
  const auto h = build_model(c);
  const auto ref = random_real_local(2, derive_seed(7, "model"));
  EXPECT_EQ((dense_total(h) - dense_total(ref)).cwiseAbs().maxCoeff(), 0.0);
  const auto pinned = parse_config("command: spectrum\nmodel: {kind: random_real, n_sites: 2, seed: 5}\nparams: {dt: 0.1}\n");
  EXPECT_EQ((dense_total(build_model(pinned)) - dense_total(random_real_local(2, 5))).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Cli, StrictModeAndFailuresLeaveNothing) {
  // dt ||H|| far above 1/4 violates the Magnus preconditions
  auto c = parse_config("command: bounds\nmodel: {kind: tfim, n_sites: 3}\nparams: {dt: 0.5}\n");
  const fs::path out = scratch("strict");
  std::ostringstream log;
  EXPECT_EQ(run(c, out, log), exit_ok);
  EXPECT_NE(log.str().find("warning"), std::string::npos);
  fs::remove_all(out);
  c.strict = true;
  EXPECT_EQ(run(c, out, log), exit_strict);
  EXPECT_FALSE(fs::exists(out / "result.csv"));
  EXPECT_FALSE(fs::exists(out / "manifest.json"));

  // degenerate ground space: eigenpair matching is refused
  const auto bad = parse_config("command: spectrum\nmodel: {kind: heisenberg_ff, n_sites: 3}\nparams: {dt: 0.1}\n");
  EXPECT_EQ(run(bad, out, log), exit_numerical);
  EXPECT_FALSE(fs::exists(out / "result.csv"));
  fs::remove_all(out);
}

TEST(Cli, AllCommandsRunOnSmallModels) {
  for (const char* name : {"spectrum_counterexample.yaml", "rpe_tfim3.yaml", "qpe_tfim4.yaml", "leakage_tfim4.yaml",
                           "trotter_error_explicit.yaml"}) {
    const auto c = load_config(fs::path(TROTTERFX_CONFIG_DIR) / name);
    const Artifacts a = execute(c);
    EXPECT_FALSE(a.table.rows.empty()) << name;
    EXPECT_TRUE(all_finite(a.table) && all_finite(a.summary)) << name;
  }
}

TEST(Cli, JsonTableFormat) {
  auto c = parse_config(std::string(tfim_spectrum) + "output: {path: s, format: json}\n");
  const fs::path out = scratch("json");
  std::ostringstream log;
  ASSERT_EQ(run(c, out, log), exit_ok);
  const json t = json::parse(slurp(out / "s.json"));
  EXPECT_EQ(t["rows"].size(), 8u);
  EXPECT_EQ(t["columns"][0], "k");
  fs::remove_all(out);
}
