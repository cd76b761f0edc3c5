#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cholec/common/errors.hpp"
#include "cholec/eval/controller.hpp"
#include "cholec/eval/harness.hpp"
#include "cholec/eval/metrics.hpp"
#include "cholec/eval/replay.hpp"
#include "cholec/ppo/checkpoint.hpp"
#include "scenes.hpp"
#include "test_util.hpp"

namespace cholec::eval {
namespace {

env::EnvConfig short_config(int limit = 60) {
  env::EnvConfig c;
  c.time_limit_steps = limit;
  return c;
}

// ---- controller specs ----

TEST(TeamSpec, ControllerTextRoundTrips) {
  for (const char* text : {"policy", "policy-greedy", "human", "noop", "random", "heuristic",
                           "seq:7*50", "seq:0,1,8*3,2"}) {
    EXPECT_EQ(to_string(parse_controller(text)), text);
  }
  EXPECT_EQ(parse_controller("seq:7*3,7").sequence, (std::vector<int>{7, 7, 7, 7}));
  EXPECT_EQ(to_string(parse_controller("seq:7*3,7")), "seq:7*4");
  EXPECT_TRUE(parse_controller("seq:1*0").sequence.empty());
}

TEST(TeamSpec, TeamTextRoundTrips) {
  const TeamSpec t = parse_team("heuristic+seq:7*5");
  EXPECT_EQ(t.gripper.script, ScriptKind::kHeuristic);
  EXPECT_EQ(t[env::Instrument::kCauter].sequence.size(), 5u);
  EXPECT_FALSE(t.switch_control);
  EXPECT_EQ(to_string(t), "heuristic+seq:7*5");
  const TeamSpec s = parse_team("human+human/switch");
  EXPECT_TRUE(s.switch_control);
  EXPECT_EQ(to_string(s), "human+human/switch");
}

TEST(TeamSpec, MalformedTextIsRejected) {
  for (const char* bad : {"noop", "noop+noop+noop", "noop+walk", "seq:9+noop", "seq:x+noop",
                          "noop+seq:1*-2", "human+noop/switch", ""}) {
    EXPECT_THROW(parse_team(bad), ConfigError) << bad;
  }
}

TEST(TeamSpec, HumanWithoutInputIsAContractError) {
  EXPECT_THROW(Team(parse_team("human+noop"), env::EnvConfig{}), ContractError);
}

TEST(TeamSpec, PolicyWithoutCheckpointIsAConfigError) {
  EXPECT_THROW(Team(parse_team("policy+noop"), env::EnvConfig{}), ConfigError);
}

// ---- metrics ----

TEST(PathLength, DegenerateTrajectories) {
  EXPECT_EQ(path_length({}), 0.0);
  EXPECT_EQ(path_length({Vec3(1, 2, 3)}), 0.0);
  EXPECT_EQ(path_length({Vec3(1, 2, 3), Vec3(1, 2, 3)}), 0.0);
}

TEST(PathLength, AxisStepsSumExactly) {
  std::vector<Vec3> p;
  for (int i = 0; i <= 10; ++i) p.emplace_back(0.0, 2.0 * i, 0.0);
  EXPECT_EQ(path_length(p), 20.0);
  // 3-4-5 triangles
  EXPECT_EQ(path_length({Vec3(0, 0, 0), Vec3(3, 4, 0), Vec3(3, 4, 5)}), 10.0);
}

TEST(PathLength, RandomWalkMatchesExtendedPrecisionSum) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 3.0);
  std::vector<Vec3> p{Vec3::Zero()};
  for (int i = 0; i < 100; ++i) p.push_back(p.back() + Vec3(n(rng), n(rng), n(rng)));
  long double ref = 0.0L;
  for (std::size_t i = 1; i < p.size(); ++i) {
    long double s = 0.0L;
    for (int k = 0; k < 3; ++k) {
      const long double d = static_cast<long double>(p[i][k]) - static_cast<long double>(p[i - 1][k]);
      s += d * d;
    }
    ref += std::sqrt(s);
  }
  EXPECT_NEAR(path_length(p), static_cast<double>(ref), 1e-9 * static_cast<double>(ref));
}

TEST(Summarize, PopulationStatistics) {
  EXPECT_EQ(summarize({}).mean, 0.0);
  const Summary one = summarize({4.5});
  EXPECT_EQ(one.mean, 4.5);
  EXPECT_EQ(one.std, 0.0);
  const Summary two = summarize({1.0, 3.0});
  EXPECT_EQ(two.mean, 2.0);
  EXPECT_EQ(two.std, 1.0);
  const Summary four = summarize({2.0, 4.0, 4.0, 6.0});
  EXPECT_EQ(four.mean, 4.0);
  EXPECT_DOUBLE_EQ(four.std, std::sqrt(2.0));
}

TEST(Aggregate, CountsOutcomesAndSummarizesColumns) {
  EpisodeMetrics a, b, c;
  a.outcome = env::Outcome::kReachedGoal;
  a.time_s = 1.0;
  a.col_gl = 2;
  b.outcome = env::Outcome::kLostGrasp;
  b.time_s = 2.0;
  c.outcome = env::Outcome::kRanOutOfTime;
  c.time_s = 3.0;
  c.col_gl = 4;
  const Aggregate g = aggregate({a, b, c});
  EXPECT_EQ(g.episodes, 3);
  EXPECT_EQ(g.reached_goal, 1);
  EXPECT_EQ(g.lost_grasp, 1);
  EXPECT_EQ(g.ran_out_of_time, 1);
  EXPECT_DOUBLE_EQ(g.success_rate, 100.0 / 3.0);
  EXPECT_DOUBLE_EQ(g.time_s.mean, 2.0);
  EXPECT_DOUBLE_EQ(g.time_s.std, std::sqrt(2.0 / 3.0));
  EXPECT_DOUBLE_EQ(g.col_gl.mean, 2.0);
  EXPECT_THROW(aggregate({}), ContractError);
}

// ---- episodes ----

TEST(RunEpisode, NoOpTeamRunsOutOfTimeWithoutMoving) {
  const env::EnvConfig c = short_config();
  const EpisodeResult r = run_episode(c, parse_team("noop+noop"), 5, false);
  EXPECT_EQ(r.metrics.outcome, env::Outcome::kRanOutOfTime);
  EXPECT_FALSE(r.metrics.success);
  EXPECT_EQ(r.metrics.steps, 60);
  EXPECT_EQ(r.metrics.time_s, 2.0);
  EXPECT_EQ(r.metrics.pl_gripper_mm, 0.0);
  EXPECT_EQ(r.metrics.pl_cauter_mm, 0.0);
  EXPECT_FALSE(r.replay.has_value());
}

TEST(RunEpisode, UnitInsertionStepsGiveExactPathLength) {
  env::EnvConfig c = short_config();
  c.jitter = {0.0, 0.0, 0.0, 0.0};
  env::CholecEnv e(c, env::EnvAssets::build(c, test::straight_cauter_scene()));
  Team team(parse_team("noop+seq:7*50"), c);
  const EpisodeResult r = run_episode(e, team, 3, false);
  EXPECT_EQ(r.metrics.pl_cauter_mm, 50.0);
  EXPECT_EQ(r.metrics.pl_gripper_mm, 0.0);
  EXPECT_EQ(r.metrics.steps, 60);
  EXPECT_EQ(r.metrics.time_s, 60.0 / 30.0);
}

TEST(RunEpisode, InterpenetrationCountsOneStepPerFramePerPair) {
  env::EnvConfig c = short_config(25);
  c.jitter = {0.0, 0.0, 0.0, 0.0};
  env::CholecEnv e(c, env::EnvAssets::build(c, test::interpenetration_scene()));
  e.reset(0);
  const env::StepResult first = e.step({});
  // several triangles touch at once but each pair counts once
  EXPECT_GT(first.collisions.cauter_gallbladder.contacts, 1);
  Team team(parse_team("noop+noop"), c);
  const EpisodeResult r = run_episode(e, team, 0, false);
  EXPECT_EQ(r.metrics.steps, 25);
  EXPECT_EQ(r.metrics.col_gl, 25);
  EXPECT_EQ(r.metrics.col_cl, 25);
  EXPECT_EQ(r.metrics.col_cg, 25);
  EXPECT_EQ(r.metrics.col_ii, 25);
}

TEST(RunEpisode, TimeIsStepsOverThirty) {
  const env::EnvConfig c = short_config(1000);
  const EvalReport rep = evaluate(c, parse_team("heuristic+heuristic"), 3, 40);
  for (const auto& m : rep.episodes) {
    EXPECT_EQ(m.time_s, m.steps / 30.0);
    EXPECT_LE(m.steps, 1000);
  }
}

TEST(Evaluate, SameSeedsGiveIdenticalMetrics) {
  const env::EnvConfig c = short_config(80);
  const TeamSpec team = parse_team("random+random");
  const EvalReport a = evaluate(c, team, 3, 100);
  const EvalReport b = evaluate(c, team, 3, 100);
  ASSERT_EQ(a.episodes.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.episodes[i].episode_seed, 100 + i);
    EXPECT_EQ(a.episodes[i].final_digest, b.episodes[i].final_digest);
    EXPECT_EQ(a.episodes[i].pl_cauter_mm, b.episodes[i].pl_cauter_mm);
    EXPECT_EQ(a.episodes[i].return_gripper, b.episodes[i].return_gripper);
  }
  EXPECT_NE(a.episodes[0].final_digest, a.episodes[1].final_digest);
  EXPECT_THROW(evaluate(c, team, 0, 0), ConfigError);
}

TEST(Evaluate, FrozenPolicyIsDeterministic) {
  test::TempDir dir("eval_policy");
  const env::EnvConfig c = short_config(40);
  for (const char* name : {"gripper", "cauter"}) {
    nn::PolicyValueNet<float> net(nn::ArchSpec::features(env::kFeatureDim, 32, 16), name);
    net.initialize(name[0]);
    ppo::save_checkpoint(net, nn::AdamState<float>::zeros_like(net.parameters()), 0, 0,
                         env::config_hash(c), dir / (std::string(name) + ".ckpt"));
  }
  TeamSpec team = parse_team("policy+policy");
  team.gripper.checkpoint = (dir / "gripper.ckpt").string();
  team.cauter.checkpoint = (dir / "cauter.ckpt").string();
  const EvalReport a = evaluate(c, team, 2, 9);
  const EvalReport b = evaluate(c, team, 2, 9);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.episodes[i].final_digest, b.episodes[i].final_digest);
    EXPECT_EQ(a.episodes[i].return_cauter, b.episodes[i].return_cauter);
  }

  env::EnvConfig image = c;
  image.obs_mode = env::ObsMode::kImage;
  EXPECT_THROW(load_policy(team.gripper.checkpoint, image), CheckpointError);
}

// ---- switch-control ----

class FixedController : public Controller {
 public:
  explicit FixedController(int id) : id_(id) {}
  void begin_episode(std::uint64_t) override {}
  env::InstrumentAction act(const env::CholecEnv&, const env::Observation&) override { return id_; }

 private:
  int id_;
};

TEST(SwitchControl, InactiveInstrumentReceivesNoOp) {
  const env::EnvConfig c = short_config();
  env::CholecEnv e(c);
  const env::Observation obs = e.reset(0);
  Team team(std::make_unique<FixedController>(1), std::make_unique<FixedController>(7), true);
  team.begin_episode(0);
  ASSERT_EQ(team.active(), env::Instrument::kGripper);
  env::JointAction a = team.act(e, obs);
  EXPECT_EQ(std::get<int>(a.gripper), 1);
  EXPECT_EQ(std::get<int>(a.cauter), kin::kNoOpId);
  EXPECT_TRUE(team.toggle_active());
  a = team.act(e, obs);
  EXPECT_EQ(std::get<int>(a.gripper), kin::kNoOpId);
  EXPECT_EQ(std::get<int>(a.cauter), 7);

  Team both(std::make_unique<FixedController>(1), std::make_unique<FixedController>(7), false);
  EXPECT_FALSE(both.toggle_active());
  a = both.act(e, obs);
  EXPECT_EQ(std::get<int>(a.gripper), 1);
  EXPECT_EQ(std::get<int>(a.cauter), 7);
}

// ---- replay and report ----

TEST(Replay, RecordedEpisodeReplaysDigestForDigest) {
  const env::EnvConfig c = short_config(50);
  const EpisodeResult r = run_episode(c, parse_team("random+heuristic"), 21, true);
  ASSERT_TRUE(r.replay.has_value());
  const ReplayLog& log = *r.replay;
  EXPECT_EQ(log.actions.size(), static_cast<std::size_t>(r.metrics.steps));
  EXPECT_EQ(log.digests.back(), r.metrics.final_digest);

  test::TempDir dir("replay");
  save_replay(log, dir / "r.jsonl");
  const ReplayLog back = load_replay(dir / "r.jsonl");
  EXPECT_EQ(to_jsonl(back), to_jsonl(log));
  int observed = 0;
  const ReplayCheck check = run_replay(back, [&](const env::CholecEnv&, const env::StepResult&) { ++observed; });
  EXPECT_TRUE(check.matches);
  EXPECT_EQ(check.first_mismatch, -1);
  EXPECT_EQ(check.steps, r.metrics.steps);
  EXPECT_EQ(observed, r.metrics.steps);
  EXPECT_EQ(check.metrics.final_digest, r.metrics.final_digest);
}

TEST(Replay, ContinuousActionsSurviveSerialization) {
  const env::EnvConfig c = short_config(30);
  env::CholecEnv e(c);
  e.reset(4);
  ReplayLog log;
  log.config = env::to_json(c);
  log.config_hash = env::config_hash(c);
  log.episode_seed = 4;
  log.team = "human+human";
  log.initial_digest = env::state_digest(e.state());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 30 && !e.state().done; ++t) {
    env::JointAction a{kin::Axes{u(rng), u(rng), u(rng), u(rng)},
                       t % 2 ? env::InstrumentAction{static_cast<int>(rng() % 9)}
                             : env::InstrumentAction{kin::Axes{u(rng), 0.1, 0.0, -1.0}}};
    e.step(a);
    log.actions.push_back(a);
    log.digests.push_back(env::state_digest(e.state()));
  }
  const ReplayLog back = replay_from_jsonl(to_jsonl(log));
  EXPECT_TRUE(run_replay(back).matches);

  ReplayLog tampered = back;
  tampered.digests[7] ^= 1;
  const ReplayCheck bad = run_replay(tampered);
  EXPECT_FALSE(bad.matches);
  EXPECT_EQ(bad.first_mismatch, 8);

  ReplayLog wrong_hash = back;
  wrong_hash.config_hash ^= 1;
  EXPECT_THROW(run_replay(wrong_hash), ConfigError);
}

TEST(Replay, MalformedLinesAreIoErrors) {
  EXPECT_THROW(replay_from_jsonl(""), IoError);
  EXPECT_THROW(replay_from_jsonl("{\"type\":\"step\",\"t\":0,\"gripper\":8,\"cauter\":8,\"digest\":\"0\"}\n"),
               IoError);
  EXPECT_THROW(replay_from_jsonl("not json\n"), IoError);
}

TEST(Report, RegenerationIsByteIdentical) {
  const env::EnvConfig c = short_config(40);
  std::vector<ReplayLog> replays;
  const EvalReport rep = evaluate(c, parse_team("heuristic+random"), 3, 7, &replays);
  ASSERT_EQ(replays.size(), 3u);
  test::TempDir a("report_a"), b("report_b");
  const auto files_a = write_report(rep, replays, a.path());
  std::vector<ReplayLog> replays_b;
  const auto files_b = write_report(evaluate(c, parse_team("heuristic+random"), 3, 7, &replays_b),
                                    replays_b, b.path());
  ASSERT_EQ(files_a.size(), 6u);
  ASSERT_EQ(files_a.size(), files_b.size());
  for (std::size_t i = 0; i < files_a.size(); ++i) {
    EXPECT_EQ(files_a[i].filename(), files_b[i].filename());
    EXPECT_EQ(test::read_file(files_a[i]), test::read_file(files_b[i])) << files_a[i];
  }
  const std::string hash = files_a[0].filename().string().substr(9, 16);
  EXPECT_EQ(files_a[0].filename(), "episodes_" + hash + "_7-9.csv");
  EXPECT_EQ(files_a[1].filename(), "table_" + hash + "_7-9.csv");
  EXPECT_EQ(files_a[2].filename(), "summary_" + hash + "_7-9.json");
  EXPECT_EQ(files_a[3].filename(), "replay_" + hash + "_7.jsonl");
  EXPECT_TRUE(run_replay(load_replay(files_a[5])).matches);

  const std::string table = test::read_file(files_a[1]);
  EXPECT_EQ(table.rfind("metric,mean,std\nsuccess_pct,", 0), 0u);
  const auto summary = nlohmann::json::parse(test::read_file(files_a[2]));
  EXPECT_EQ(summary.at("episodes"), 3);
  EXPECT_EQ(summary.at("team"), "heuristic+random");
  EXPECT_EQ(env::env_config_from_json(summary.at("config")).time_limit_steps, 40);
}

TEST(Report, WithoutReplaysOnlyTablesAreWritten) {
  const EvalReport rep = evaluate(short_config(20), parse_team("noop+noop"), 2, 0);
  test::TempDir dir("report_plain");
  const auto files = write_report(rep, {}, dir.path());
  EXPECT_EQ(files.size(), 3u);
  int on_disk = 0;
  for ([[maybe_unused]] const auto& f : std::filesystem::directory_iterator(dir.path())) ++on_disk;
  EXPECT_EQ(on_disk, 3);
  const std::string csv = test::read_file(files[0]);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

}  // namespace
}  // namespace cholec::eval
