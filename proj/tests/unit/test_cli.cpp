#include <array>
#include <cstdio>
#include <fstream>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "cholec/common/errors.hpp"
#include "run_config.hpp"
#include "test_util.hpp"

namespace cholec::cli {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int rc = -1;
  std::string out;
};

// Runs the installed binary with `args`; stderr is discarded.
CliRun cholec(const std::string& args, const std::string& env_prefix = "") {
  const std::string cmd = env_prefix + " '" CHOLEC_CLI_PATH "' " + args + " 2>/dev/null";
  CliRun r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(p);
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

// ---- configuration ----

TEST(RunConfig, DefaultsWithoutFileOrEnvironment) {
  const RunConfig rc = load_run_config({}, {});
  EXPECT_EQ(rc.env.time_limit_steps, env::EnvConfig{}.time_limit_steps);
  EXPECT_EQ(rc.ppo.batch_steps, ppo::PpoConfig{}.batch_steps);
}

TEST(RunConfig, EnvironmentOverridesFileValues) {
  test::TempDir dir("cli_cfg");
  write(dir / "c.json", R"({"env": {"time_limit_steps": 300}, "ppo": {"learning_rate": 0.001}})");
  const RunConfig from_file = load_run_config(dir / "c.json", {});
  EXPECT_EQ(from_file.env.time_limit_steps, 300);
  EXPECT_EQ(from_file.ppo.learning_rate, 0.001);

  const RunConfig rc = load_run_config(
      dir / "c.json", {{"CHOLEC_ENV_TIME_LIMIT_STEPS", "200"},
                       {"CHOLEC_ENV_OBS_MODE", "image"},
                       {"CHOLEC_ENV_REWARD_WEIGHTS__SUCCESS", "12.5"},
                       {"CHOLEC_PPO_GAMMA", "0.95"},
                       {"CHOLEC_SEED", "3"},
                       {"HOME", "/root"}});
  EXPECT_EQ(rc.env.time_limit_steps, 200);
  EXPECT_EQ(rc.env.obs_mode, env::ObsMode::kImage);
  EXPECT_EQ(rc.env.weights.success, 12.5);
  EXPECT_EQ(rc.ppo.gamma, 0.95);
  EXPECT_EQ(rc.ppo.learning_rate, 0.001);
}

TEST(RunConfig, UnknownKeysAreConfigErrors) {
  EXPECT_THROW(load_run_config({}, {{"CHOLEC_ENV_TIME_LIMIT", "5"}}), ConfigError);
  EXPECT_THROW(load_run_config({}, {{"CHOLEC_PPO_LERNING_RATE", "5"}}), ConfigError);
  EXPECT_THROW(load_run_config({}, {{"CHOLEC_ENV_REWARD_WEIGHTS__BONUS", "1"}}), ConfigError);
  test::TempDir dir("cli_bad");
  write(dir / "a.json", R"({"env": {}, "trainer": {}})");
  EXPECT_THROW(load_run_config(dir / "a.json", {}), ConfigError);
  write(dir / "b.json", R"({"env": {"time_limit_step": 10}})");
  EXPECT_THROW(load_run_config(dir / "b.json", {}), ConfigError);
  write(dir / "c.json", "{not json");
  EXPECT_THROW(load_run_config(dir / "c.json", {}), ConfigError);
  EXPECT_THROW(load_run_config(dir / "missing.json", {}), ConfigError);
  // values are validated after merging
  EXPECT_THROW(load_run_config({}, {{"CHOLEC_PPO_GAMMA", "1.5"}}), ConfigError);
}

TEST(RunConfig, SerializedConfigLoadsBack) {
  test::TempDir dir("cli_rt");
  RunConfig rc;
  rc.env.n_rays = 24;
  rc.ppo.entropy_coef = 0.02;
  write(dir / "rc.json", to_json(rc).dump());
  const RunConfig back = load_run_config(dir / "rc.json", {});
  EXPECT_EQ(to_json(back), to_json(rc));
}

// ---- the binary ----

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(cholec("--help").rc, 0);
  EXPECT_NE(cholec("").rc, 0);
  EXPECT_NE(cholec("fly").rc, 0);
  EXPECT_NE(cholec("eval --obs-mode pixels").rc, 0);
}

TEST(Cli, GradcheckPasses) {
  const CliRun r = cholec("gradcheck --seed 1");
  EXPECT_EQ(r.rc, 0);
  EXPECT_NE(r.out.find("PASS"), std::string::npos) << r.out;
}

TEST(Cli, EvalIsReproducibleAcrossRuns) {
  test::TempDir dir("cli_eval");
  const std::string args = " --episodes 2 --seed 7 --team heuristic+random --replays";
  const std::string env = "CHOLEC_ENV_TIME_LIMIT_STEPS=80";
  const CliRun a = cholec("eval --out '" + (dir / "a").string() + "'" + args, env);
  const CliRun b = cholec("eval --out '" + (dir / "b").string() + "'" + args, env);
  ASSERT_EQ(a.rc, 0);
  ASSERT_EQ(b.rc, 0);
  int files = 0;
  for (const auto& f : fs::directory_iterator(dir / "a")) {
    ++files;
    EXPECT_EQ(test::read_file(f.path()), test::read_file(dir / "b" / f.path().filename())) << f.path();
  }
  EXPECT_EQ(files, 5);
  for (const auto& f : fs::directory_iterator(dir / "a")) {
    if (f.path().extension() != ".jsonl") continue;
    const CliRun r = cholec("replay '" + f.path().string() + "'");
    EXPECT_EQ(r.rc, 0);
    EXPECT_NE(r.out.find("digests match"), std::string::npos);
  }
}

TEST(Cli, TrainWritesCheckpointsThatEvalLoads) {
  test::TempDir dir("cli_train");
  const std::string out = (dir / "run").string();
  const std::string env = "CHOLEC_PPO_BATCH_STEPS=64 CHOLEC_PPO_N_PARALLEL_ENVS=8 CHOLEC_PPO_MINIBATCHES_PER_EPOCH=2 "
                          "CHOLEC_PPO_FEATURE_WIDTH=16 CHOLEC_PPO_FEATURE_LSTM=8";
  const CliRun t = cholec("train --quiet --steps 64 --seed 2 --out '" + out + "'", env);
  ASSERT_EQ(t.rc, 0);
  for (const char* f : {"gripper.ckpt", "cauter.ckpt", "trainer.state", "telemetry.csv", "config.json"}) {
    EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
  }
  const CliRun e = cholec("eval --episodes 1 --out '" + (dir / "rep").string() + "' --checkpoint-gripper '" +
                       out + "/gripper.ckpt' --checkpoint-cauter '" + out + "/cauter.ckpt'",
                       "CHOLEC_ENV_TIME_LIMIT_STEPS=20");
  EXPECT_EQ(e.rc, 0);
  EXPECT_NE(e.out.find("team policy+policy"), std::string::npos) << e.out;
  // image observations do not fit a feature checkpoint
  EXPECT_EQ(cholec("eval --episodes 1 --obs-mode image --out '" + (dir / "rep2").string() +
                   "' --checkpoint-gripper '" + out + "/gripper.ckpt' --checkpoint-cauter '" + out +
                   "/cauter.ckpt'")
                .rc,
            1);
}

TEST(Cli, TrainWithZeroStepsWritesInitialCheckpoints) {
  test::TempDir dir("cli_train0");
  const CliRun t = cholec("train --quiet --steps 0 --out '" + (dir / "run").string() + "'");
  EXPECT_EQ(t.rc, 0);
  EXPECT_TRUE(fs::exists(dir / "run" / "gripper.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "run" / "cauter.ckpt"));
  // header only
  EXPECT_EQ(test::read_file(dir / "run" / "telemetry.csv").find('\n') + 1,
            test::read_file(dir / "run" / "telemetry.csv").size());
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  EXPECT_EQ(cholec("eval --episodes 1", "CHOLEC_ENV_NOT_A_KEY=1").rc, 2);
  EXPECT_EQ(cholec("eval --episodes 1 --team noop").rc, 2);
  // range checks on flags are usage errors reported by the parser
  EXPECT_NE(cholec("eval --episodes 0").rc, 0);
  EXPECT_NE(cholec("eval --episodes 0").rc, 2);
}

TEST(Cli, SceneDumpLoadsBack) {
  test::TempDir dir("cli_scene");
  const std::string path = (dir / "scene.json").string();
  ASSERT_EQ(cholec("scene --out '" + path + "'").rc, 0);
  const CliRun a = cholec("scene --in '" + path + "'");
  const CliRun b = cholec("scene");
  EXPECT_EQ(a.rc, 0);
  EXPECT_EQ(a.out, b.out);
  // an explicit scene file behaves like the built-in scene
  const std::string args = " --episodes 1 --seed 3 --team heuristic+heuristic";
  const CliRun with = cholec("eval --out '" + (dir / "x").string() + "'" + args,
                          "CHOLEC_ENV_TIME_LIMIT_STEPS=30 CHOLEC_ENV_SCENE_PATH='" + path + "'");
  const CliRun without = cholec("eval --out '" + (dir / "y").string() + "'" + args, "CHOLEC_ENV_TIME_LIMIT_STEPS=30");
  ASSERT_EQ(with.rc, 0);
  ASSERT_EQ(without.rc, 0);
  const auto digest_column = [](const std::string& csv) { return csv.substr(csv.rfind(',') + 1); };
  std::string ca, cb;
  for (const auto& f : fs::directory_iterator(dir / "x")) {
    if (f.path().filename().string().rfind("episodes_", 0) == 0) ca = test::read_file(f.path());
  }
  for (const auto& f : fs::directory_iterator(dir / "y")) {
    if (f.path().filename().string().rfind("episodes_", 0) == 0) cb = test::read_file(f.path());
  }
  EXPECT_EQ(digest_column(ca), digest_column(cb));
}

TEST(Cli, PlayServesForAFixedNumberOfTicks) {
  const CliRun r = cholec("play --port 0 --team noop+noop --ticks 3");
  EXPECT_EQ(r.rc, 0);
  EXPECT_NE(r.out.find("/session"), std::string::npos);
}

}  // namespace
}  // namespace cholec::cli
