#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "uwauth/error.hpp"
#include "uwauth/experiment.hpp"

using namespace uwauth;
using namespace uwauth::experiment;
namespace fs = std::filesystem;

namespace {

constexpr const char* kSmallConfig = R"({
  "scenario_id": "golden",
  "geometry": {"M": 4, "seed": 5},
  "plan": {"snr_grid_db": [0, 10, 20], "n_trials": 400, "seed": 9}
})";

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("uwauth_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

RunOptions opts_for(const fs::path& out, unsigned workers = 1) {
  RunOptions o;
  o.out = out;
  o.workers = workers;
  return o;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(UWAUTH_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Csv, SchemaAndAbsentFields) {
  sim::ErrorRateCurve c;
  c.scenario_id = "s";
  c.source = "montecarlo";
  c.family = "identification";
  c.test = "ident_distance";
  sim::RatePoint p;
  p.snr_db = 5.0;
  p.p_mc = 0.25;
  p.p_mc_ci = 0.01;
  p.n_trials = 100;
  c.points.push_back(p);
  const auto csv = format_csv({c}, "{}");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# config={}");
  std::getline(in, line);
  EXPECT_EQ(line, kCsvHeader);
  std::getline(in, line);
  EXPECT_EQ(line, "s,montecarlo,ident_distance,,5,,,,,0.25,0.01,100,0");
}

TEST(Simulate, GoldenFile) {
  TempDir dir("golden");
  const auto cfg = config::parse_config(kSmallConfig);
  const auto res = cmd_simulate(cfg, opts_for(dir.path()));
  const auto produced = slurp(dir.path() / "step1.csv");
  const fs::path golden = fs::path(UWAUTH_GOLDEN_DIR) / "step1.csv";
  if (std::getenv("UWAUTH_UPDATE_GOLDEN")) {
    std::ofstream(golden, std::ios::binary) << produced;
  }
  ASSERT_TRUE(fs::exists(golden)) << "set UWAUTH_UPDATE_GOLDEN=1 to create " << golden;
  EXPECT_EQ(produced, slurp(golden));
}

TEST(Simulate, FamiliesAndManifest) {
  TempDir dir("families");
  const auto res = cmd_simulate(config::parse_config(kSmallConfig), opts_for(dir.path()));
  for (const char* f : {"step1.csv", "test2.csv", "fusion.csv", "final.csv", "identification.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir.path() / f)) << f;
  }
  const auto manifest = slurp(dir.path() / "manifest.json");
  EXPECT_NE(manifest.find("\"version\""), std::string::npos);
  EXPECT_NE(manifest.find("\"seed\""), std::string::npos);
}

TEST(Simulate, EmbeddedConfigReproducesFile) {
  TempDir a("embed_a"), b("embed_b");
  cmd_simulate(config::parse_config(kSmallConfig), opts_for(a.path()));
  const auto first = slurp(a.path() / "final.csv");
  const auto header = first.substr(0, first.find('\n'));
  ASSERT_EQ(header.rfind("# config=", 0), 0u);
  const auto embedded = header.substr(std::string("# config=").size());
  cmd_simulate(config::parse_config(embedded), opts_for(b.path(), 3));
  EXPECT_EQ(slurp(b.path() / "final.csv"), first);
}

TEST(Simulate, SeedOverrideIsEmbedded) {
  TempDir dir("seed");
  auto o = opts_for(dir.path());
  o.seed = 1234;
  cmd_simulate(config::parse_config(kSmallConfig), o);
  EXPECT_NE(slurp(dir.path() / "step1.csv").find("\"seed\":1234"), std::string::npos);
}

TEST(Simulate, UnwritableDirectoryFailsBeforeCompute) {
  TempDir dir("unwritable");
  std::ofstream(dir.path() / "blocker") << "x";
  // a trillion trials would never finish: the error must come first
  auto cfg = config::parse_config(R"({"plan": {"n_trials": 1000000000000}})");
  EXPECT_THROW(cmd_simulate(cfg, opts_for(dir.path() / "blocker" / "out")), IoError);
  EXPECT_THROW(cmd_analytic(cfg, opts_for(dir.path() / "blocker" / "out")), IoError);
}

TEST(Simulate, JsonFormat) {
  TempDir dir("json");
  auto o = opts_for(dir.path());
  o.format = "json";
  cmd_simulate(config::parse_config(kSmallConfig), o);
  EXPECT_TRUE(fs::exists(dir.path() / "step1.json"));
  o.format = "xml";
  EXPECT_THROW(cmd_simulate(config::parse_config(kSmallConfig), o), ValidationError);
}

TEST(Analytic, WritesPrefixedFiles) {
  TempDir dir("analytic");
  const auto res = cmd_analytic(config::parse_config(kSmallConfig), opts_for(dir.path()));
  EXPECT_TRUE(fs::exists(dir.path() / "analytic_step1.csv"));
  EXPECT_TRUE(fs::exists(dir.path() / "analytic_manifest.json"));
  const auto body = slurp(dir.path() / "analytic_step1.csv");
  EXPECT_NE(body.find(",analytic,step1,"), std::string::npos);
  EXPECT_NE(body.find(",analytic_verbatim,step1,"), std::string::npos);
}

TEST(Validate, PassesAndCatchesInjectedMismatch) {
  TempDir dir("validate");
  const auto cfg = config::parse_config(
      R"({"geometry": {"M": 4, "seed": 5}, "plan": {"snr_grid_db": [0, 10], "n_trials": 20000, "seed": 9}})");
  const auto good = cmd_validate(cfg, opts_for(dir.path()));
  EXPECT_TRUE(good.pass());
  EXPECT_TRUE(fs::exists(dir.path() / "validation.csv"));
  auto o = opts_for(dir.path());
  o.inject_sigma_scale = 2.0;
  const auto bad = cmd_validate(cfg, o);
  EXPECT_FALSE(bad.pass());
  std::ostringstream os;
  print_report(os, bad);
  EXPECT_NE(os.str().find("FAIL"), std::string::npos);
}

TEST(Scenarios, EmitAndReparse) {
  TempDir dir("scenarios");
  const auto files = emit_scenarios(dir.path());
  EXPECT_EQ(files.size(), 4u);
  for (const auto& f : files) EXPECT_NO_THROW(config::parse_config(slurp(f))) << f;
}

TEST(Cli, ExitCodes) {
  TempDir dir("cli");
  const auto cfg = dir.path() / "small.json";
  std::ofstream(cfg) << kSmallConfig;
  const auto bad = dir.path() / "bad.json";
  std::ofstream(bad) << R"({"thresholds": {"eps_d": -1}})";
  std::ofstream(dir.path() / "blocker") << "x";
  const std::string out = " --quiet --out " + (dir.path() / "o").string();

  EXPECT_EQ(run_cli("simulate --config " + cfg.string() + out), 0);
  EXPECT_EQ(run_cli("analytic --config " + cfg.string() + out), 0);
  EXPECT_EQ(run_cli("simulate --config " + bad.string() + out), 1);
  EXPECT_EQ(run_cli("simulate --config " + cfg.string() + " --quiet --out " + (dir.path() / "blocker" / "x").string()),
            2);
  EXPECT_EQ(run_cli("validate --config " + cfg.string() + out + " --inject-sigma-scale 3"), 3);
  EXPECT_EQ(run_cli("emit-scenarios --out " + (dir.path() / "sc").string()), 0);
  EXPECT_NE(run_cli("--version"), 1);
}
