#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CAUSALEC_CLI) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("causalec_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string scenario(const std::string& name) { return std::string(CAUSALEC_SCENARIO_DIR) + "/" + name + ".json"; }

}  // namespace

TEST(Cli, RunWritesTraceAndStorageDeterministically) {
  const auto a = scratch("run_a");
  const auto b = scratch("run_b");
  ASSERT_EQ(run_cli("run --scenario " + scenario("small_4_2") + " --seed 7 --out " + a.string()), 0);
  ASSERT_EQ(run_cli("run --scenario " + scenario("small_4_2") + " --seed 7 --out " + b.string()), 0);
  for (const char* f : {"trace.jsonl", "storage.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_EQ(run_cli("check --trace " + (a / "trace.jsonl").string() + " --out " + (a / "report.json").string()), 0);
  EXPECT_NE(slurp(a / "report.json").find("\"passed\": true"), std::string::npos);
}

TEST(Cli, InvalidScenarioExitsTwo) {
  const auto dir = scratch("invalid");
  std::ofstream(dir / "bad.json") << R"({"n": 2, "k": 3})";
  EXPECT_EQ(run_cli("run --scenario " + (dir / "bad.json").string() + " --seed 1 --out " + dir.string()), 2);
  EXPECT_EQ(run_cli("run --scenario " + (dir / "missing.json").string() + " --out " + dir.string()), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
}

TEST(Cli, StepLimitExitsThree) {
  const auto dir = scratch("limit");
  EXPECT_EQ(run_cli("run --scenario " + scenario("acceptance") + " --seed 2 --step-limit 40 --out " + dir.string()), 3);
}

TEST(Cli, CheckRejectsCorruptTrace) {
  const auto dir = scratch("corrupt");
  std::ofstream(dir / "trace.jsonl") << "{not json\n";
  EXPECT_EQ(run_cli("check --trace " + (dir / "trace.jsonl").string()), 2);
}

TEST(Cli, SweepPassesAndNegativeControlFails) {
  const auto dir = scratch("sweep");
  EXPECT_EQ(run_cli("sweep --scenario " + scenario("small_4_2") + " --seeds 1..4 --jobs 2 --out " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "sweep.csv"));
  const auto neg = scratch("sweep_neg");
  EXPECT_NE(run_cli("sweep --scenario " + scenario("small_4_2") + " --seeds 1..2 --negative-control --out " + neg.string()), 0);
  EXPECT_TRUE(fs::exists(neg / "first_failure.jsonl"));
}

TEST(Cli, EmptyOrMalformedSeedRangeExitsTwo) {
  const auto dir = scratch("range");
  EXPECT_EQ(run_cli("sweep --scenario " + scenario("small_4_2") + " --seeds 5..2 --out " + dir.string()), 2);
  EXPECT_EQ(run_cli("sweep --scenario " + scenario("small_4_2") + " --seeds abc --out " + dir.string()), 2);
}

TEST(Cli, CodecTestPasses) { EXPECT_EQ(run_cli("codec-test --n-max 6 --trials 20"), 0); }
