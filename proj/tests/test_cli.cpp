#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kin/image.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string output;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("kintile_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  CliRun run(const std::string& args) const {
    const std::string log = path("log.txt");
    const std::string cmd = std::string(KINTILE_CLI) + " " + args + " > " + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static constexpr const char* kNet = " --seed 3 --patch 16 --base-width 4 --resblocks 1";
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, TranslateWritesImageAndReport) {
  ASSERT_EQ(run("synth -o " + path("in.png") + " --height 40 --width 48").code, 0);
  const auto r = run("translate -i " + path("in.png") + " -o " + path("out.png") + kNet);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto out = kin::read_image(path("out.png"));
  EXPECT_EQ(out.height(), 40u);
  EXPECT_EQ(out.width(), 48u);
  const auto report = nlohmann::json::parse(slurp(path("out.png.json")));
  EXPECT_EQ(report.at("mode"), "kin");
  EXPECT_EQ(report.at("grid").at("rows"), 3);
  EXPECT_EQ(report.at("config").at("seed"), 3);
  EXPECT_EQ(report.at("config").at("patch"), 16);
}

TEST_F(Cli, KernelSizeOneMatchesPatchInBytes) {
  ASSERT_EQ(run("synth -o " + path("in.png") + " --height 32 --width 48").code, 0);
  ASSERT_EQ(run("translate -i " + path("in.png") + " -o " + path("k1.png") + " --mode kin --kernel-size 1" + kNet).code, 0);
  ASSERT_EQ(run("translate -i " + path("in.png") + " -o " + path("pin.png") + " --mode patch-in" + kNet).code, 0);
  EXPECT_EQ(slurp(path("k1.png")), slurp(path("pin.png")));
}

TEST_F(Cli, ExitCodes) {
  ASSERT_EQ(run("synth -o " + path("in.png") + " --height 64 --width 64").code, 0);
  EXPECT_EQ(run("translate -i " + path("in.png") + " -o " + path("o.png") + " --patch 16").code, 2);
  EXPECT_EQ(run("translate --no-such-flag").code, 2);
  EXPECT_EQ(run("translate -i x.png -o y.png --mode batch-norm --seed 1").code, 2);
  EXPECT_EQ(run("").code, 2);
  const auto refused = run("translate -i " + path("in.png") + " -o " + path("o.png") +
                           " --mode full-in --full-in-max-pixels 1000" + kNet);
  EXPECT_EQ(refused.code, 1);
  EXPECT_NE(refused.output.find("budget"), std::string::npos) << refused.output;
  EXPECT_EQ(run("translate -i " + path("missing.png") + " -o " + path("o.png") + kNet).code, 1);
  EXPECT_EQ(run("translate -i " + path("in.png") + " -o " + path("o.png") + " --weights " + path("none.urw")).code, 1);
}

TEST_F(Cli, WeightsFileDefinesArchitecture) {
  ASSERT_EQ(run("synth -o " + path("in.png") + " --height 32 --width 32").code, 0);
  ASSERT_EQ(run("init-weights -o " + path("w.urw") + kNet).code, 0);
  ASSERT_EQ(run("translate -i " + path("in.png") + " -o " + path("a.png") + kNet).code, 0);
  const auto r = run("translate -i " + path("in.png") + " -o " + path("b.png") + " --patch 16 --weights " + path("w.urw"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(slurp(path("a.png")), slurp(path("b.png")));
}

TEST_F(Cli, ConfigFileWithFlagOverride) {
  ASSERT_EQ(run("synth -o " + path("in.png") + " --height 32 --width 32").code, 0);
  {
    std::ofstream cfg(path("run.json"));
    cfg << R"({"mode": "tin", "patch": 16, "seed": 3, "base-width": 4, "resblocks": 1, "kernel-size": 5})";
  }
  const auto r = run("translate -i " + path("in.png") + " -o " + path("o.png") + " --config " +
                     path("run.json") + " --kernel-size 3");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto report = nlohmann::json::parse(slurp(path("o.png.json")));
  EXPECT_EQ(report.at("mode"), "tin");
  EXPECT_EQ(report.at("config").at("kernel-size"), 3);
  EXPECT_EQ(report.at("config").at("base-width"), 4);
  {
    std::ofstream cfg(path("bad.json"));
    cfg << "{not json";
  }
  EXPECT_EQ(run("translate -i " + path("in.png") + " -o " + path("o.png") + " --config " + path("bad.json")).code, 2);
}

TEST_F(Cli, CompareEmitsOneRowPerMode) {
  ASSERT_EQ(run("synth -o " + path("in.png") + " --height 64 --width 64").code, 0);
  const auto r = run("compare -i " + path("in.png") + " -o " + path("m.csv") + " --report " +
                     path("m.json") + " --out-dir " + path("imgs") + kNet);
  ASSERT_EQ(r.code, 0) << r.output;
  const std::string csv = slurp(path("m.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "mode,kernel,histogram_correlation,sobel_gradient,ssim,seam_discrepancy");
  const auto j = nlohmann::json::parse(slurp(path("m.json")));
  ASSERT_EQ(j.at("rows").size(), 3u);
  EXPECT_EQ(j.at("rows")[0].at("mode"), "patch-in");
  EXPECT_EQ(j.at("rows")[2].at("mode"), "kin");
  EXPECT_TRUE(fs::exists(path("imgs/tin.png")));
  EXPECT_EQ(run("compare -i " + path("in.png") + " -o " + path("m.csv")).code, 2);
}

TEST_F(Cli, CompareSinglePatchRowsAgree) {
  ASSERT_EQ(run("synth -o " + path("in.png") + " --height 16 --width 16").code, 0);
  ASSERT_EQ(run("compare -i " + path("in.png") + " -o " + path("m.csv") + " --report " + path("m.json") + kNet).code, 0);
  const auto rows = nlohmann::json::parse(slurp(path("m.json"))).at("rows");
  for (const char* key : {"histogram_correlation", "sobel_gradient", "ssim", "seam_discrepancy"}) {
    EXPECT_NEAR(rows[0].at(key).get<double>(), rows[1].at(key).get<double>(), 1e-6) << key;
    EXPECT_NEAR(rows[0].at(key).get<double>(), rows[2].at(key).get<double>(), 1e-6) << key;
  }
}

TEST_F(Cli, AnalyzeStatsDuplicateTiles) {
  ASSERT_EQ(run("synth -o " + path("in.png") + " --pattern tiles --tile 16 --height 32 --width 48").code, 0);
  const auto r = run("analyze-stats -i " + path("in.png") + " -o " + path("s.csv") +
                     " --layers 1,3 --include-self" + kNet);
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream csv(slurp(path("s.csv")));
  std::string line;
  std::getline(csv, line);
  int rows = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    ASSERT_EQ(f.size(), 10u);
    EXPECT_NEAR(std::stod(f[6]), 1.0, 1e-6) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 21 * 2);
}

TEST_F(Cli, BenchMemReport) {
  const auto r = run("bench-mem -o " + path("b.json") + " --grids 1,3 --full-in-sizes 128,256 --seed 3 --patch 16 --base-width 8 --resblocks 1");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto j = nlohmann::json::parse(slurp(path("b.json")));
  EXPECT_TRUE(j.at("passed").get<bool>());
  EXPECT_EQ(j.at("checks").size(), 4u);
  EXPECT_EQ(j.at("config").at("subcommand"), "bench-mem");
}
