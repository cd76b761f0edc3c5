#include "cholec/eval/harness.hpp"

#include <cstdio>
#include <fstream>

#include "cholec/common/errors.hpp"
#include "cholec/common/hash.hpp"

namespace cholec::eval {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("failed writing " + path.string());
}

nlohmann::json summary_json(const Summary& s) { return {{"mean", s.mean}, {"std", s.std}}; }

}  // namespace

EpisodeResult run_episode(env::CholecEnv& env, Team& team, std::uint64_t episode_seed, bool record,
                          const std::string& team_label) {
  env::Observation obs = env.reset(episode_seed);
  team.begin_episode(episode_seed);
  MetricsRecorder rec;
  rec.begin(episode_seed, env.info());
  EpisodeResult result;
  if (record) {
    ReplayLog log;
    log.config = env::to_json(env.config());
    log.config_hash = env::config_hash(env.config());
    log.episode_seed = episode_seed;
    log.team = team_label;
    log.initial_digest = env::state_digest(env.state());
    result.replay = std::move(log);
  }
  while (!env.state().done) {
    const env::JointAction action = team.act(env, obs);
    env::StepResult r = env.step(action);
    rec.record(r);
    if (result.replay) {
      result.replay->actions.push_back(action);
      result.replay->digests.push_back(env::state_digest(env.state()));
    }
    obs = std::move(r.observation);
  }
  result.metrics = rec.finish(env::state_digest(env.state()));
  return result;
}

EpisodeResult run_episode(const env::EnvConfig& config, const TeamSpec& team,
                          std::uint64_t episode_seed, bool record) {
  env::CholecEnv env(config);
  Team t(team, config);
  return run_episode(env, t, episode_seed, record, to_string(team));
}

EvalReport evaluate(const env::EnvConfig& config, const TeamSpec& team, int n_episodes,
                    std::uint64_t seed_base, std::vector<ReplayLog>* replays) {
  if (n_episodes < 1) throw ConfigError("evaluate: n_episodes must be >= 1");
  EvalReport report;
  report.config = config;
  report.team = to_string(team);
  report.seed_base = seed_base;
  env::CholecEnv env(config);
  Team t(team, config);
  for (int k = 0; k < n_episodes; ++k) {
    EpisodeResult r = run_episode(env, t, seed_base + k, replays != nullptr, report.team);
    report.episodes.push_back(r.metrics);
    if (replays) replays->push_back(std::move(*r.replay));
  }
  report.aggregate = aggregate(report.episodes);
  return report;
}

std::vector<std::filesystem::path> write_report(const EvalReport& report,
                                                const std::vector<ReplayLog>& replays,
                                                const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create report directory " + out_dir.string() + ": " + ec.message());
  const std::string hash = to_hex(report.config_hash());
  const std::uint64_t last = report.seed_base + report.episodes.size() - 1;
  const std::string tag = hash + "_" + std::to_string(report.seed_base) + "-" + std::to_string(last);
  std::vector<std::filesystem::path> written;

  std::string csv =
      "episode_seed,outcome,success,steps,time_s,pl_gripper_mm,pl_cauter_mm,col_gl,col_cl,col_cg,"
      "col_ii,return_gripper,return_cauter,final_distance_mm,final_visibility,final_digest\n";
  for (const auto& e : report.episodes) {
    csv += std::to_string(e.episode_seed) + "," + env::to_string(e.outcome) + "," +
           (e.success ? "1" : "0") + "," + std::to_string(e.steps) + "," + num(e.time_s) + "," +
           num(e.pl_gripper_mm) + "," + num(e.pl_cauter_mm) + "," + std::to_string(e.col_gl) + "," +
           std::to_string(e.col_cl) + "," + std::to_string(e.col_cg) + "," +
           std::to_string(e.col_ii) + "," + num(e.return_gripper) + "," + num(e.return_cauter) +
           "," + num(e.final_distance_mm) + "," + num(e.final_visibility) + "," +
           to_hex(e.final_digest) + "\n";
  }
  written.push_back(out_dir / ("episodes_" + tag + ".csv"));
  write_file(written.back(), csv);

  const Aggregate& a = report.aggregate;
  std::string table = "metric,mean,std\n";
  table += "success_pct," + num(a.success_rate) + ",\n";
  const std::pair<const char*, const Summary*> rows[] = {
      {"time_s", &a.time_s},           {"col_gl", &a.col_gl},
      {"col_cl", &a.col_cl},           {"col_cg", &a.col_cg},
      {"col_ii", &a.col_ii},           {"pl_gripper_mm", &a.pl_gripper_mm},
      {"pl_cauter_mm", &a.pl_cauter_mm}};
  for (const auto& [name, s] : rows) table += std::string(name) + "," + num(s->mean) + "," + num(s->std) + "\n";
  written.push_back(out_dir / ("table_" + tag + ".csv"));
  write_file(written.back(), table);

  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [name, s] : rows) metrics[name] = summary_json(*s);
  metrics["return_gripper"] = summary_json(a.return_gripper);
  metrics["return_cauter"] = summary_json(a.return_cauter);
  const nlohmann::json summary{
      {"schema_version", kReportSchemaVersion},
      {"config_hash", hash},
      {"team", report.team},
      {"seed_first", report.seed_base},
      {"seed_last", last},
      {"episodes", a.episodes},
      {"success_rate_pct", a.success_rate},
      {"outcomes",
       {{"ReachedGoal", a.reached_goal}, {"LostGrasp", a.lost_grasp}, {"RanOutOfTime", a.ran_out_of_time}}},
      {"metrics", metrics},
      {"config", env::to_json(report.config)}};
  written.push_back(out_dir / ("summary_" + tag + ".json"));
  write_file(written.back(), summary.dump(2) + "\n");

  for (const auto& log : replays) {
    written.push_back(out_dir / ("replay_" + to_hex(log.config_hash) + "_" +
                                 std::to_string(log.episode_seed) + ".jsonl"));
    save_replay(log, written.back());
  }
  return written;
}

}  // namespace cholec::eval
