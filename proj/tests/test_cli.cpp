#include <gtest/gtest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sbm/harness.hpp"
#include "sbm/io.hpp"

namespace fs = std::filesystem;
using namespace sbm;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("sbm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(const std::string& args) const {
    const std::string cmd = std::string(SBM_CLI_PATH) + " " + args + " > " + path("stdout.txt") + " 2> " + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string slurp(const std::string& p) const {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SimulateFitDiagnose) {
  ASSERT_EQ(run("simulate --n 60 --q 2 --family poisson --design dyad --rho 0.5 --seed 7 --out " + path("g.csv")), 0);
  ASSERT_TRUE(fs::exists(path("g.csv")));
  ASSERT_TRUE(fs::exists(path("g.truth.json")));
  const ObservedGraph g = read_graph(path("g.csv"), ExpFamily::poisson());
  EXPECT_EQ(g.n(), 60);
  const GroundTruth t = truth_from_json(read_json(path("g.truth.json")));
  EXPECT_EQ(t.z_star.size(), 60);
  EXPECT_EQ(t.seed, 7u);

  ASSERT_EQ(run("fit --input " + path("g.csv") + " --q 2 --family poisson --restarts 3 --seed 1 --out " + path("fit.json")), 0);
  const FitResult f = fit_from_json(read_json(path("fit.json")));
  EXPECT_EQ(f.map_labels.size(), 60);

  ASSERT_EQ(run("diagnose --fit " + path("fit.json") + " --truth " + path("g.truth.json") + " --input " + path("g.csv") +
                " --out " + path("diag.json")),
            0);
  const json d = read_json(path("diag.json"));
  for (const char* key : {"elr", "elr_n2", "profile_elr", "profile_elr_n2", "symmetry", "class_distinctness", "alignment",
                          "hamming", "confusion"})
    EXPECT_TRUE(d.contains(key)) << key;
  EXPECT_LE(d.at("elr").get<double>(), 0.0);
  EXPECT_LE(d.at("profile_elr").get<double>(), 1e-9);
}

TEST_F(Cli, SimulateIsDeterministicAndAcceptsParamsFile) {
  const std::string params = std::string(SBM_SOURCE_DIR) + "/configs/params_three_block.json";
  ASSERT_EQ(run("simulate --n 30 --family poisson --params " + params + " --design node --rho 0.3 --seed 5 --out " + path("a.csv")), 0);
  ASSERT_EQ(run("simulate --n 30 --family poisson --params " + params + " --design node --rho 0.3 --seed 5 --out " + path("b.csv")), 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_EQ(truth_from_json(read_json(path("a.truth.json"))).params_star.num_blocks(), 3);
}

TEST_F(Cli, ExperimentIsByteIdenticalForSeed) {
  ExperimentConfig c;
  c.study = Study::CltConn;
  c.n_grid = {20};
  c.rho_grid = {0.6};
  c.params_star = SbmParams::from_means(Vector::Constant(2, 0.5), (Matrix(2, 2) << 0.7, 0.2, 0.2, 0.7).finished(),
                                        ExpFamily::bernoulli());
  c.replicates = 8;
  write_json(path("cfg.json"), config_to_json(c));
  ASSERT_EQ(run("experiment --config " + path("cfg.json") + " --seed 11 --out " + path("r1.json")), 0);
  ASSERT_EQ(run("experiment --config " + path("cfg.json") + " --seed 11 --out " + path("r2.json")), 0);
  EXPECT_EQ(slurp(path("r1.json")), slurp(path("r2.json")));
  ASSERT_EQ(run("experiment --config " + path("cfg.json") + " --seed 12 --out " + path("r3.json")), 0);
  EXPECT_NE(slurp(path("r1.json")), slurp(path("r3.json")));
  EXPECT_EQ(read_json(path("r1.json")).at("config").at("master_seed").get<std::uint64_t>(), 11u);
}

TEST_F(Cli, ErrorsAndExitCodes) {
  EXPECT_EQ(run("simulate --n 10 --seed 1 --out " + path("x.csv") + " --bogus"), 2);
  EXPECT_EQ(run("fit --q 2 --out " + path("f.json")), 2);
  EXPECT_EQ(run("fit --input " + path("missing.csv") + " --q 2 --out " + path("f.json")), 1);
  EXPECT_NE(slurp(path("stderr.txt")).find("error:"), std::string::npos);
  EXPECT_EQ(run("simulate --n 10 --seed 1 --design snowball --out " + path("x.csv")), 1);
  EXPECT_EQ(run("--help"), 0);
}
