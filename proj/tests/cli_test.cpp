#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "fairsignal/agent.hpp"
#include "fairsignal/checkpoint.hpp"
#include "fairsignal/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr
};

// Clears inherited FAIRSIGNAL_* variables so each test sets exactly what it needs.
std::string shell_command(const std::string& env, const std::string& args, const fs::path& capture) {
  return "env -u FAIRSIGNAL_CONFIG -u FAIRSIGNAL_SEED -u FAIRSIGNAL_STEPS -u FAIRSIGNAL_BETA "
         "-u FAIRSIGNAL_OUT " +
         env + " '" FAIRSIGNAL_CLI_PATH "' " + args + " > '" + capture.string() + "' 2>&1";
}

RunResult run_cli(const std::string& args, const std::string& env = {}) {
  const fs::path capture = fs::temp_directory_path() / "fairsignal_cli_test_capture.txt";
  const std::string cmd = shell_command(env, args, capture);
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(capture);
  std::ostringstream s;
  s << in.rdbuf();
  r.output = s.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fairsignal_cli_test_" + name);
  fs::remove_all(dir);
  return dir;
}

int count_lines(const std::string& s) {
  return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST(Cli, NoSubcommandIsUsageError) {
  EXPECT_EQ(run_cli("").exit_code, 2);
  EXPECT_EQ(run_cli("fly --out /tmp/x").exit_code, 2);
}

TEST(Cli, MissingConfigIsUsageError) {
  const auto dir = fresh_dir("missing_config");
  const auto r = run_cli("train --config /nonexistent/cfg.json --out " + dir.string());
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("does not exist"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "manifest.json"));
}

TEST(Cli, MissingOutIsUsageError) {
  EXPECT_EQ(run_cli("train --steps 0").exit_code, 2);
}

TEST(Cli, ZeroStepTrainWritesInitialisationAndHeaderOnlyLog) {
  const auto dir = fresh_dir("zero_steps");
  const auto r = run_cli("train --steps 0 --seed 5 --out " + dir.string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(slurp(dir / "train_log.csv"), "step,mean_reward,loss,epsilon,flow_level\n");
  std::mt19937_64 rng(5);
  const auto expected = fairsignal::MlpParams::initialized({29, 64, 64, 3}, rng);
  EXPECT_EQ(fairsignal::load_checkpoint((dir / "checkpoint.bin").string()), expected);

  const json m = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(m["command"], "train");
  EXPECT_EQ(m["seed"], 5);
  EXPECT_EQ(m["artifacts"]["checkpoint.bin"], fairsignal::cli::sha256_file((dir / "checkpoint.bin").string()));
  EXPECT_FALSE(m.contains("duration"));
}

TEST(Cli, BaselineEvalWritesSixSummaryRows) {
  const auto dir = fresh_dir("baseline");
  const auto r = run_cli("eval --baseline --seed 3 --out " + dir.string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_EQ(count_lines(slurp(dir / "summary.csv")), 7);
  const json report = json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(report["controller"], "webster");
  EXPECT_TRUE(fs::exists(dir / "samples.csv"));
}

TEST(Cli, EvalNeedsExactlyOneController) {
  const auto dir = fresh_dir("eval_usage");
  EXPECT_EQ(run_cli("eval --out " + dir.string()).exit_code, 2);
  EXPECT_EQ(run_cli("eval --baseline --checkpoint x.bin --out " + dir.string()).exit_code, 2);
}

TEST(Cli, TruncatedCheckpointFailsWithoutOutputs) {
  const auto train_dir = fresh_dir("trunc_src");
  ASSERT_EQ(run_cli("train --steps 0 --out " + train_dir.string()).exit_code, 0);
  const std::string bytes = slurp(train_dir / "checkpoint.bin");
  const fs::path broken = train_dir / "broken.bin";
  std::ofstream(broken, std::ios::binary) << bytes.substr(0, bytes.size() / 2);

  const auto dir = fresh_dir("trunc_eval");
  const auto r = run_cli("eval --checkpoint " + broken.string() + " --out " + dir.string());
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_FALSE(fs::exists(dir / "summary.csv"));
  EXPECT_FALSE(fs::exists(dir / "manifest.json"));
}

TEST(Cli, ParetoNeedsTwoAgents) {
  const auto src = fresh_dir("pareto_one_src");
  ASSERT_EQ(run_cli("train --steps 0 --out " + src.string()).exit_code, 0);
  const auto dir = fresh_dir("pareto_one");
  const auto r = run_cli("pareto --agent 0.5=" + (src / "checkpoint.bin").string() + " --out " + dir.string());
  EXPECT_EQ(r.exit_code, 2);
}

TEST(Cli, ParetoWarnsOnBetaMismatchAndUsesFlag) {
  const auto a = fresh_dir("pareto_a");
  const auto b = fresh_dir("pareto_b");
  ASSERT_EQ(run_cli("train --steps 0 --beta 0.4 --out " + a.string()).exit_code, 0);
  ASSERT_EQ(run_cli("train --steps 0 --beta 0.6 --seed 2 --out " + b.string()).exit_code, 0);
  const auto dir = fresh_dir("pareto_out");
  const auto r = run_cli("pareto --agent 0.5=" + (a / "checkpoint.bin").string() + " --agent 0.6=" +
                         (b / "checkpoint.bin").string() + " --out " + dir.string());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("warning"), std::string::npos);
  const std::string csv = slurp(dir / "pareto.csv");
  EXPECT_EQ(count_lines(csv), 3);
  EXPECT_NE(csv.find("\n0.5,"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "pareto.dat"));
}

TEST(Cli, RerunsProduceIdenticalManifests) {
  const auto dir = fresh_dir("rerun");
  ASSERT_EQ(run_cli("train --steps 300 --seed 9 --out " + dir.string()).exit_code, 0);
  const std::string first = slurp(dir / "manifest.json");
  ASSERT_EQ(run_cli("train --steps 300 --seed 9 --out " + dir.string()).exit_code, 0);
  EXPECT_EQ(slurp(dir / "manifest.json"), first);

  const auto eval_dir = fresh_dir("rerun_eval");
  const std::string eval_args = "eval --checkpoint " + (dir / "checkpoint.bin").string() + " --out " + eval_dir.string();
  ASSERT_EQ(run_cli(eval_args).exit_code, 0);
  const std::string eval_first = slurp(eval_dir / "manifest.json");
  ASSERT_EQ(run_cli(eval_args).exit_code, 0);
  EXPECT_EQ(slurp(eval_dir / "manifest.json"), eval_first);
}

TEST(Cli, PrecedenceFlagsOverEnvOverFile) {
  const auto dir = fresh_dir("precedence");
  fs::create_directories(dir);
  const fs::path cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({"env.beta": 0.4, "seed": 11})";

  auto manifest_after = [&](const std::string& env, const std::string& flags) {
    const auto out = dir / "out";
    const auto r = run_cli("train --steps 0 --out " + out.string() + " " + flags, env);
    EXPECT_EQ(r.exit_code, 0) << r.output;
    return json::parse(slurp(out / "manifest.json"));
  };

  json m = manifest_after("", "--config " + cfg.string());
  EXPECT_EQ(m["beta"], 0.4);
  EXPECT_EQ(m["seed"], 11);

  m = manifest_after("FAIRSIGNAL_CONFIG=" + cfg.string() + " FAIRSIGNAL_BETA=0.6", "");
  EXPECT_EQ(m["beta"], 0.6);
  EXPECT_EQ(m["seed"], 11);

  m = manifest_after("FAIRSIGNAL_BETA=0.6 FAIRSIGNAL_SEED=4", "--config " + cfg.string() + " --beta 0.3");
  EXPECT_EQ(m["beta"], 0.3);
  EXPECT_EQ(m["seed"], 4);

  const auto r = run_cli("train --steps 0", "FAIRSIGNAL_OUT=" + (dir / "env_out").string());
  EXPECT_EQ(r.exit_code, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir / "env_out" / "manifest.json"));

  EXPECT_EQ(run_cli("train --steps 0 --out " + dir.string(), "FAIRSIGNAL_SEED=abc").exit_code, 2);
  EXPECT_EQ(run_cli("train --steps 0 --beta 2 --out " + dir.string()).exit_code, 2);
}
