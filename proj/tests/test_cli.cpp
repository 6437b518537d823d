#include "commands.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run_in_process(std::vector<std::string> args) {
  args.insert(args.begin(), "qkdlab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = qkdlab::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string fixture(const std::string& name) { return std::string(QKDLAB_FIXTURES_DIR) + "/" + name; }

CliRun run_binary(const std::string& args) {
  const std::string cmd = std::string(QKDLAB_BINARY) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  CliRun r;
  if (pipe == nullptr) {
    r.code = -1;
    return r;
  }
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

TEST(CliTest, AttackDemoSucceeds) {
  const CliRun r = run_in_process({"attack-demo", "--n", "3", "--trials", "2000", "--budget", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["command"], "attack-demo");
  EXPECT_EQ(j["result"]["attack"]["success_rate"], 1.0);
  EXPECT_TRUE(j["result"]["marginal"]["pass"].get<bool>());
  EXPECT_TRUE(j["ok"].get<bool>());
}

TEST(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run_in_process({"attack-demo", "--n", "1"}).code, 2);
  EXPECT_EQ(run_in_process({"attack-demo", "--message", "01"}).code, 2);
  EXPECT_EQ(run_in_process({"no-such-command"}).code, 2);
  EXPECT_EQ(run_in_process({"verify-composition", "--trials", "10"}).code, 2);
  EXPECT_EQ(run_in_process({"secrecy"}).code, 2);
  EXPECT_EQ(run_in_process({"secrecy", "--state", fixture("malformed.json")}).code, 2);
  EXPECT_EQ(run_in_process({"keystream-plan", "--target", "1e-9", "--eps0", "1e-6"}).code, 2);
}

TEST(CliTest, SeedFromEnvironment) {
  setenv("QKDLAB_SEED", "42", 1);
  const CliRun r = run_in_process({"rsa-demo"});
  unsetenv("QKDLAB_SEED");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["seed"], 42);
}

TEST(CliTest, PerfectKeyFixtureAllZero) {
  const CliRun r = run_in_process({"secrecy", "--state", fixture("perfect_key.json"), "--budget", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json res = json::parse(r.out)["result"];
  for (const char* k : {"eps_correct", "eps_robust", "eps_secret_upper", "eps_secret_lower", "eps_total"}) {
    EXPECT_NEAR(res[k].get<double>(), 0.0, 1e-12) << k;
  }
}

TEST(CliTest, AttackFixtureHasLargeSecrecyLowerBound) {
  const CliRun r = run_in_process({"secrecy", "--state", fixture("attack_n3.json"), "--budget", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_GE(json::parse(r.out)["result"]["eps_secret_lower"].get<double>(), 0.5 - 1e-9);
}

TEST(CliTest, KeystreamPlanMeetsTarget) {
  const CliRun r = run_in_process({"keystream-plan", "--target", "1e-9"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_LE(j["result"]["budget"]["eps_total"].get<double>(), 1e-9);
  EXPECT_TRUE(j["result"]["verified"].get<bool>());
}

TEST(CliTest, UnreachablePlanExitsNonzero) {
  // With ν = 1e-9 the initial key would need far more than 10^7 bits.
  const CliRun r = run_in_process({"keystream-plan", "--nu", "1e-9"});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(json::parse(r.out)["ok"].get<bool>());
  EXPECT_EQ(run_in_process({"keystream-schedule", "--c", "0", "--n0", "100000", "--ell0", "1000"}).code, 2);
}

TEST(CliTest, ScheduleCsvRowCount) {
  const CliRun r = run_in_process({"keystream-schedule", "--rounds", "50", "--format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t lines = 0;
  for (std::size_t pos = 0; (pos = r.out.find("\r\n", pos)) != std::string::npos; pos += 2) ++lines;
  EXPECT_EQ(lines, 51u);
}

TEST(CliTest, SimulateChargingModes) {
  const CliRun once = run_in_process({"keystream-simulate", "--rounds", "2000"});
  ASSERT_EQ(once.code, 0) << once.err;
  EXPECT_TRUE(json::parse(once.out)["ok"].get<bool>());
  const CliRun per = run_in_process({"keystream-simulate", "--rounds", "2000", "--charging", "per-attempt"});
  EXPECT_EQ(per.code, 1);
}

TEST(CliTest, VerifyCompositionModes) {
  const CliRun biased = run_in_process({"verify-composition", "--trials", "20000"});
  ASSERT_EQ(biased.code, 0) << biased.err;
  EXPECT_TRUE(json::parse(biased.out)["result"]["pass"].get<bool>());
  const CliRun exact = run_in_process({"verify-composition", "--enumerate"});
  ASSERT_EQ(exact.code, 0) << exact.err;
  const CliRun attack = run_in_process(
      {"verify-composition", "--source", "attack", "--n", "3", "--trials", "5000", "--budget", "4"});
  EXPECT_EQ(attack.code, 1);
  const CliRun expected = run_in_process({"verify-composition", "--source", "attack", "--n", "3", "--trials", "5000",
                                       "--budget", "4", "--expect-violation"});
  EXPECT_EQ(expected.code, 0) << expected.err;
}

TEST(CliTest, RsaDemoBobWins) {
  const CliRun r = run_in_process({"rsa-demo", "--auctions", "50"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["result"]["bob_wins"], 50);
}

TEST(CliTest, OutFileWrittenAtomically) {
  const fs::path dir = fs::temp_directory_path() / "qkdlab_cli_test";
  fs::create_directories(dir);
  const fs::path target = dir / "report.json";
  fs::remove(target);
  const CliRun r = run_in_process({"rsa-demo", "--out", target.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  std::ifstream in(target);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(json::parse(ss.str())["command"], "rsa-demo");
  for (const auto& entry : fs::directory_iterator(dir)) EXPECT_EQ(entry.path(), target);
  fs::remove_all(dir);
}

TEST(CliTest, CsvFieldQuoting) {
  EXPECT_EQ(qkdlab::cli::csv_field("plain"), "plain");
  EXPECT_EQ(qkdlab::cli::csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(qkdlab::cli::csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(CliBinaryTest, RerunsAreByteIdentical) {
  const std::string args = "verify-composition --trials 2000 --seed 7";
  const CliRun a = run_binary(args);
  const CliRun b = run_binary(args);
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_FALSE(a.out.empty());
}

TEST(CliBinaryTest, ExitCodesFromProcess) {
  EXPECT_EQ(run_binary("attack-demo --n 1").code, 2);
  EXPECT_EQ(run_binary("rsa-demo --bits 24").code, 0);
  EXPECT_EQ(run_binary("--help").code, 0);
}

}  // namespace
