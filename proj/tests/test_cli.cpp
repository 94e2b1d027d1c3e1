#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int status = 0;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rscale_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  Result run(const std::string& args, const std::string& env = "") const {
    const std::string out = path("stdout.txt"), err = path("stderr.txt");
    const std::string cmd = "env -u CI -u RSCALE_THREADS " + env + " " + RSCALE_CLI + " " + args +
                            " >" + out + " 2>" + err;
    Result r;
    const int raw = std::system(cmd.c_str());
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

const std::string kFitch = RSCALE_DATA_DIR "/fitch_1990_2023.csv";

}  // namespace

TEST_F(Cli, SmoothWritesScaleJson) {
  const auto r = run("smooth --input " + kFitch + " --eps-mono 0.1 --pd-floor 0.0005 -o " +
                     path("smoothed.json"));
  ASSERT_EQ(r.status, 0) << r.err;
  const auto j = json::parse(slurp(path("smoothed.json")));
  ASSERT_EQ(j["grades"].size(), 17u);
  EXPECT_NEAR(j["grades"][0]["p_star"].get<double>(), 0.0005, 1e-15);
  EXPECT_EQ(j["grades"][16]["p_hi"].get<double>(), 1.0);
  EXPECT_EQ(j["provenance"]["command"], "smooth");
  EXPECT_EQ(j["provenance"]["config"]["pd_floor"], 0.0005);
}

TEST_F(Cli, ProfileDesignPipeline) {
  ASSERT_EQ(run("smooth --input " + kFitch + " -o " + path("s.json")).status, 0);
  ASSERT_EQ(run("profile --scale " + path("s.json") + " -o " + path("p.json")).status, 0);
  const auto p = json::parse(slurp(path("p.json")));
  EXPECT_EQ(p["knots"].size(), 17u);
  const auto r = run("design --profile " + path("p.json") +
                     " --n-obs 10000 --direction ascending -o " + path("d.json"));
  ASSERT_EQ(r.status, 0) << r.err;
  const auto d = json::parse(slurp(path("d.json")));
  EXPECT_EQ(d["G"], 8);
  EXPECT_EQ(d["N"], 10000);
  EXPECT_EQ(d["bands"].size(), 8u);
  for (const char* key : {"p_lo", "p_hi", "p_star", "mass", "m_required"})
    EXPECT_TRUE(d["bands"][0].contains(key)) << key;
}

TEST_F(Cli, ReportAndCurves) {
  auto r = run("report --input " + kFitch);
  ASSERT_EQ(r.status, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["rows"].size(), 17u);
  EXPECT_EQ(j["rows"][0]["distinguishable"], false);
  r = run("curves --input " + kFitch + " --n-grid 1000,10000,200000 -o " + path("c.csv"));
  ASSERT_EQ(r.status, 0) << r.err;
  const auto csv = slurp(path("c.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "N,G,p1_upper,hhi_adj");
  EXPECT_NE(csv.find("\n10000,8,"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("c.provenance.json")));
}

TEST_F(Cli, SweepIsDeterministicAcrossThreads) {
  ASSERT_EQ(run("smooth --input " + kFitch + " -o " + path("s.json")).status, 0);
  ASSERT_EQ(run("design --scale " + path("s.json") + " --n-obs 10000 -o " + path("d.json")).status, 0);
  const std::string common = "sweep --design " + path("d.json") + " --baseline " + path("s.json") +
                             " --criterion yellow --iterations 400 --seed 42 --eps-max 0.1 "
                             "--eps-step 0.05";
  auto r = run(common + " --threads 1 -o " + path("a.csv"));
  ASSERT_EQ(r.status, 0) << r.err;
  r = run(common + " -o " + path("b.csv"), "RSCALE_THREADS=3");
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_EQ(slurp(path("a.baseline.csv")), slurp(path("b.baseline.csv")));
  const auto csv = slurp(path("a.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epsilon,var_percent,bad_percent,stderr");
  const auto prov = json::parse(slurp(path("b.provenance.json")));
  EXPECT_EQ(prov["config"]["seed"], 42);
  EXPECT_EQ(prov["config"]["threads"], 3);
}

TEST_F(Cli, SimulateAndCapital) {
  auto r = run("simulate --input " + kFitch +
               " --n-obs 5000 --iterations 200 --seed 1 --epsilon 0,0.1 --criterion red");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["points"].size(), 2u);
  EXPECT_EQ(j["points"][0]["var_percent"], 1.0);
  r = run("capital --pd 0.01,0.02");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto c = json::parse(r.out);
  EXPECT_NEAR(c["rows"][0]["capital"].get<double>(), 0.135525266, 1e-9);
}

TEST_F(Cli, ErrorsAreJson) {
  auto r = run("smooth --input " + path("missing.csv"));
  EXPECT_NE(r.status, 0);
  auto e = json::parse(r.err);
  EXPECT_EQ(e["error"]["code"], "cli_io.io");

  std::ofstream(path("bad.csv")) << "rating,n,d\nA,10,20\n";
  r = run("smooth --input " + path("bad.csv"));
  EXPECT_NE(r.status, 0);
  e = json::parse(r.err);
  EXPECT_EQ(e["error"]["code"], "cli_io.parse");
  EXPECT_NE(e["error"]["message"].get<std::string>().find(":2:"), std::string::npos);

  r = run("smooth --input " + kFitch + " --no-such-flag");
  EXPECT_NE(r.status, 0);
  EXPECT_EQ(json::parse(r.err)["error"]["code"], "cli_io.usage");

  r = run("design --input " + kFitch + " --n-obs 100 --direction sideways");
  EXPECT_NE(r.status, 0);
  EXPECT_EQ(json::parse(r.err)["error"]["code"], "cli_io.usage");

  r = run("design --input " + kFitch + " --n-obs 100 --alpha 0.7");
  EXPECT_NE(r.status, 0);
}

TEST_F(Cli, SeedRequiredInCi) {
  const std::string args = "simulate --input " + kFitch + " --n-obs 1000 --iterations 10";
  auto r = run(args, "CI=true");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("--seed"), std::string::npos);
  EXPECT_EQ(run(args + " --seed 3", "CI=true").status, 0);
  EXPECT_EQ(run(args).status, 0);
}
