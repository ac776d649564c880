#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("ng2c_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  Result sim(const std::string& args) const {
    const std::string out = path("stdout.txt"), err = path("stderr.txt");
    const std::string cmd = std::string(NG2C_SIM) + " " + args + " >" + out + " 2>" + err;
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  // The bundled spec cut down to `ops` operations.
  std::string spec(const std::string& name, std::uint64_t ops) const {
    std::ifstream in(std::string(NG2C_WORKLOADS_DIR) + "/" + name + ".json");
    nlohmann::json j = nlohmann::json::parse(in);
    j["duration_ops"] = ops;
    const std::string p = path(name + ".json");
    std::ofstream(p) << j.dump(2);
    return p;
  }

  fs::path dir_;
};

TEST_F(Cli, RunThenCompareReportsCopyReduction) {
  const std::string s = spec("buffer", 150000);
  ASSERT_EQ(sim("run " + s + " --pretenure off --out " + path("off.txt")).code, 0);
  ASSERT_EQ(sim("run " + s + " --pretenure on --out " + path("on.txt")).code, 0);
  ASSERT_TRUE(fs::exists(path("off.gc.jsonl")));
  EXPECT_NE(slurp(path("off.txt")).find("bytes copied"), std::string::npos);
  const Result r = sim("compare " + path("off.gc.jsonl") + " " + path("on.gc.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("copy reduction: "), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("bytes_copied"), std::string::npos);
}

TEST_F(Cli, StructuredFormats) {
  const std::string s = spec("churn", 30000);
  ASSERT_EQ(sim("run " + s + " --format structured --out " + path("r.json") + " --log " + path("r.log")).code, 0);
  const auto report = nlohmann::json::parse(slurp(path("r.json")));
  EXPECT_TRUE(report.contains("total_bytes_copied"));
  const Result c = sim("compare " + path("r.log") + " " + path("r.log") + " --format structured");
  ASSERT_EQ(c.code, 0) << c.err;
  const auto table = nlohmann::json::parse(c.out);
  for (const auto& [metric, row] : table["ratios"].items()) EXPECT_EQ(row["ratio"], 1.0) << metric;
}

TEST_F(Cli, HeapFlagsReachTheCollector) {
  const std::string s = spec("churn", 30000);
  ASSERT_EQ(sim("run " + s + " --gen0-bytes 2M --log " + path("small.log") + " --out " + path("a")).code, 0);
  ASSERT_EQ(sim("run " + s + " --gen0-bytes 8M --log " + path("big.log") + " --out " + path("b")).code, 0);
  auto lines = [](const std::string& text) { return std::count(text.begin(), text.end(), '\n'); };
  EXPECT_GT(lines(slurp(path("small.log"))), lines(slurp(path("big.log"))));
}

TEST_F(Cli, SameFlagsGiveIdenticalLogs) {
  const std::string s = spec("mixed", 60000);
  ASSERT_EQ(sim("run " + s + " --seed 17 --log " + path("1.log") + " --out " + path("1.txt")).code, 0);
  ASSERT_EQ(sim("run " + s + " --seed 17 --log " + path("2.log") + " --out " + path("2.txt")).code, 0);
  EXPECT_FALSE(slurp(path("1.log")).empty());
  EXPECT_EQ(slurp(path("1.log")), slurp(path("2.log")));
}

TEST_F(Cli, ProfileGroupsBufferSitesIntoOneCohort) {
  const std::string s = spec("buffer", 300000);
  const Result r = sim("profile " + s + " --pretenure off --format structured");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j["groups"].size(), 1u) << r.out;
  const auto sites = j["groups"][0]["sites"].get<std::vector<std::string>>();
  EXPECT_EQ(sites, (std::vector<std::string>{"memtable.root", "memtable.row", "memtable.segment"}));
}

TEST_F(Cli, MissingSpecExitsTwo) {
  const Result r = sim("run " + path("nope.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope.json"), std::string::npos) << r.err;
}

TEST_F(Cli, BadFlagsFail) {
  const std::string s = spec("churn", 1000);
  EXPECT_NE(sim("run " + s + " --pretenure maybe").code, 0);
  EXPECT_NE(sim("run " + s + " --no-such-flag").code, 0);
  EXPECT_NE(sim("").code, 0);
  const Result cfg = sim("run " + s + " --region-bytes 3000");
  EXPECT_EQ(cfg.code, 2);
  EXPECT_NE(cfg.err.find("region_bytes"), std::string::npos) << cfg.err;
  const Result cmp = sim("compare " + path("x.log") + " " + path("y.log"));
  EXPECT_EQ(cmp.code, 2);
}

TEST_F(Cli, CompareRejectsDifferentSeeds) {
  const std::string s = spec("churn", 5000);
  ASSERT_EQ(sim("run " + s + " --seed 1 --log " + path("1.log") + " --out " + path("1.txt")).code, 0);
  ASSERT_EQ(sim("run " + s + " --seed 2 --log " + path("2.log") + " --out " + path("2.txt")).code, 0);
  const Result r = sim("compare " + path("1.log") + " " + path("2.log"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("seed"), std::string::npos) << r.err;
}

TEST_F(Cli, SelftestPasses) {
  const Result r = sim("selftest --programs 5");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("0 failures"), std::string::npos) << r.out;
}

}  // namespace
