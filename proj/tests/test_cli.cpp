#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "ecbc/ecbc.hpp"

namespace fs = std::filesystem;
using namespace ecbc;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("ecbc_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Exit status of `ecbc <args>`; stdout and stderr land in log().
  int run(const std::string& args) {
    const std::string cmd = std::string(ECBC_CLI_PATH) + " " + args + " > " + (dir_ / "log.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string log() const { return read(dir_ / "log.txt"); }

  static std::string read(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path write(const std::string& name, const std::string& content) const {
    std::ofstream(dir_ / name) << content;
    return dir_ / name;
  }

  // n rows of a positively dependent pair.
  fs::path observations(std::size_t n, std::size_t d = 2) const {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z(0.0, 1.0);
    std::ostringstream s;
    for (std::size_t j = 0; j < d; ++j) s << (j ? "," : "") << "x" << j + 1;
    s << "\n";
    for (std::size_t i = 0; i < n; ++i) {
      const double f = z(rng);
      for (std::size_t j = 0; j < d; ++j) s << (j ? "," : "") << f + z(rng);
      s << "\n";
    }
    return write("obs.csv", s.str());
  }

  std::string quick_fit() const { return " --chains 1 --burn-in 100 --samples 200"; }

  fs::path out(const std::string& name) const { return dir_ / name; }

  std::size_t lines(const fs::path& p) const {
    const std::string s = read(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("fit"), 2);
  EXPECT_EQ(run("--format xml measure m.json"), 2);
  EXPECT_EQ(run("--help"), 0);
  EXPECT_NE(log().find("portfolio keys"), std::string::npos);
}

TEST_F(CliTest, FitWritesModelAndManifest) {
  const fs::path obs = observations(40);
  ASSERT_EQ(run("--seed 4 --out " + out("a").string() + " fit " + obs.string() + quick_fit()), 0) << log();
  for (const char* f : {"model.json", "degrees.json", "trace.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(out("a") / f)) << f;
  }
  const Json manifest = Json::parse(read(out("a") / "manifest.json"));
  EXPECT_EQ(manifest["command"], "fit");
  EXPECT_EQ(manifest["seed"], 4);
  EXPECT_EQ(manifest["outputs"], Json({"model.json", "degrees.json", "trace.csv"}));
  EXPECT_EQ(manifest["mcmc"]["samples"], 200);
  const EcbcModel model = load_model((out("a") / "model.json").string());
  EXPECT_EQ(model.n(), 40u);
  EXPECT_EQ(model.d(), 2u);
  const Json degrees = Json::parse(read(out("a") / "degrees.json"));
  EXPECT_EQ(degrees["columns"], Json({"x1", "x2"}));
  // Header plus one row per retained draw.
  EXPECT_EQ(lines(out("a") / "trace.csv"), 201u);

  ASSERT_EQ(run("--seed 4 --threads 2 --out " + out("b").string() + " fit " + obs.string() + quick_fit()), 0);
  EXPECT_EQ(read(out("a") / "model.json"), read(out("b") / "model.json"));
  EXPECT_EQ(read(out("a") / "trace.csv"), read(out("b") / "trace.csv"));
}

TEST_F(CliTest, FitErrorCodes) {
  EXPECT_EQ(run("--out " + out("x").string() + " fit " + out("missing.csv").string()), 3);
  EXPECT_NE(log().find("data error"), std::string::npos);
  const fs::path bad = write("bad.csv", "a,b\n1,2\n3,oops\n");
  EXPECT_EQ(run("--out " + out("x").string() + " fit " + bad.string()), 3);
  const fs::path one = write("one.csv", "a,b\n1,2\n");
  EXPECT_EQ(run("--out " + out("x").string() + " fit " + one.string()), 4);
  const fs::path obs = observations(10);
  EXPECT_EQ(run("--out " + out("x").string() + " fit " + obs.string() + " --prior wide"), 2);
  const fs::path cfg = write("fit.cfg", "mcmc.chains = 1\nmcmc.unknown = 3\n");
  EXPECT_EQ(run("--out " + out("x").string() + " fit " + obs.string() + " --config " + cfg.string()), 2);
  EXPECT_NE(log().find("unknown key"), std::string::npos);
  // Nothing is written when a command fails.
  EXPECT_FALSE(fs::exists(out("x") / "manifest.json"));
}

TEST_F(CliTest, GridMeasureAndSample) {
  const fs::path obs = observations(30, 3);
  ASSERT_EQ(run("--out " + out("fit").string() + " fit " + obs.string() + quick_fit()), 0) << log();
  const std::string model = (out("fit") / "model.json").string();
  const EcbcModel m = load_model(model);

  EXPECT_EQ(run("--out " + out("g").string() + " grid " + model), 2);
  ASSERT_EQ(run("--out " + out("g").string() + " grid " + model + " --resolution 11 --slice 1,3 --at 0.5,0.3,0.5"), 0)
      << log();
  EXPECT_EQ(lines(out("g") / "grid.csv"), 122u);
  ASSERT_EQ(run("--format json --out " + out("gj").string() + " grid " + model +
                " --resolution 5 --slice 1,2 --at 0.2,0.2,0.7"),
            0);
  const Json grid = Json::parse(read(out("gj") / "grid.json"));
  ASSERT_EQ(grid["cdf"].size(), 25u);
  EXPECT_TRUE(grid["pdf"][0].is_null());
  EXPECT_NEAR(grid["cdf"][24].get<double>(), ecbc_cdf(m, std::vector<double>{1.0, 1.0, 0.7}), 1e-12);

  ASSERT_EQ(run("--out " + out("m").string() + " measure " + model), 0) << log();
  const Json dep = Json::parse(read(out("m") / "dependence.json"));
  EXPECT_NEAR(dep["rho_ecbc"].get<double>(), spearman_rho_ecbc(m), 1e-12);
  EXPECT_NEAR(dep["tau_ecbc"].get<double>(), kendall_tau_ecbc(m), 1e-12);
  EXPECT_EQ(dep["d"], 3);

  ASSERT_EQ(run("--seed 9 --out " + out("s").string() + " sample " + model + " --count 100"), 0) << log();
  EXPECT_EQ(lines(out("s") / "samples.csv"), 101u);
  EXPECT_EQ(read(out("s") / "samples.csv").substr(0, 12), "u_1,u_2,u_3\n");
  ASSERT_EQ(run("--seed 9 --out " + out("s2").string() + " sample " + model + " --count 100 --no-header"), 0);
  EXPECT_EQ(lines(out("s2") / "samples.csv"), 100u);
  EXPECT_EQ(run("--format json --out " + out("s3").string() + " sample " + model + " --count 10"), 2);
  EXPECT_EQ(run("--out " + out("s3").string() + " sample " + model + " --count 0"), 2);
  EXPECT_EQ(run("--out " + out("s3").string() + " sample " + out("nope.json").string() + " --count 3"), 3);
}

TEST_F(CliTest, BenchmarkTable) {
  const fs::path cfg = write("bench.cfg",
                             "copula = frank\ntheta = 2\nn = 15, 20\nreplicates = 2\neval_points = 100\n"
                             "estimators = beta, bernstein_janssen\n");
  ASSERT_EQ(run("--seed 2 --out " + out("b").string() + " benchmark " + cfg.string()), 0) << log();
  const std::string table = read(out("b") / "benchmark.csv");
  EXPECT_EQ(table.substr(0, table.find('\n')), "copula,estimator,n,ISB,IV,IMSE");
  EXPECT_EQ(lines(out("b") / "benchmark.csv"), 5u);
  EXPECT_NE(table.find("frank,beta,20,"), std::string::npos);

  const fs::path bad = write("bad.cfg", "copula = gaussian\n");
  EXPECT_EQ(run("--out " + out("c").string() + " benchmark " + bad.string()), 2);
  const fs::path bad_theta = write("theta.cfg", "copula = clayton\ntheta = -3\n");
  EXPECT_EQ(run("--out " + out("c").string() + " benchmark " + bad_theta.string()), 3);
}

TEST_F(CliTest, PortfolioReportOnBundledPrices) {
  const std::string prices = std::string(ECBC_DATA_DIR) + "/nasdaq10_synthetic.csv";
  const fs::path cfg = write("pf.cfg",
                             "levels = 0.1, 0.05\nM = 300\nN = 3\nmcmc.chains = 1\nmcmc.burn_in = 50\n"
                             "mcmc.samples = 100\n");
  ASSERT_EQ(run("--seed 1 --out " + out("p").string() + " portfolio " + prices + " --config " + cfg.string()), 0)
      << log();
  const Json r = Json::parse(read(out("p") / "portfolio.json"));
  EXPECT_EQ(r["T"], 501);
  EXPECT_EQ(r["d"], 10);
  EXPECT_EQ(r["M"], 300);
  ASSERT_EQ(r["tickers"].size(), 10u);
  ASSERT_EQ(r["levels"].size(), 2u);
  for (const auto& [key, level] : r["levels"].items()) {
    for (const char* s : {"var", "cvar"}) {
      for (const char* q : {"mean", "sd", "q025", "q25", "median", "q75", "q975"}) {
        EXPECT_TRUE(level[s][q].is_number()) << key << " " << s << " " << q;
      }
    }
    EXPECT_EQ(level["weights"].size(), 10u);
    EXPECT_TRUE(level["weights"]["AAPL"]["median"].is_number());
    EXPECT_TRUE(level["historical"]["var"].is_number());
    EXPECT_GE(level["historical"]["cvar"].get<double>(), level["historical"]["var"].get<double>());
  }
  // Header plus N rows per level.
  EXPECT_EQ(lines(out("p") / "replicates.csv"), 7u);
  const Json manifest = Json::parse(read(out("p") / "manifest.json"));
  EXPECT_EQ(manifest["outputs"], Json({"portfolio.json", "replicates.csv"}));

  const fs::path floor = write("floor.cfg", "v_min = 0.2\n");
  EXPECT_EQ(run("--out " + out("q").string() + " portfolio " + prices + " --config " + floor.string()), 4);
  const fs::path bad = write("prices.csv", "date,A\n2020-01-02,1\n2020-01-01,2\n");
  EXPECT_EQ(run("--out " + out("q").string() + " portfolio " + bad.string()), 3);
  EXPECT_NE(log().find("strictly increasing"), std::string::npos);
}
