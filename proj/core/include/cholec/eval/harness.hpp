#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cholec/env/cholec_env.hpp"
#include "cholec/eval/controller.hpp"
#include "cholec/eval/metrics.hpp"
#include "cholec/eval/replay.hpp"

namespace cholec::eval {

inline constexpr int kReportSchemaVersion = 1;

struct EpisodeResult {
  EpisodeMetrics metrics;
  std::optional<ReplayLog> replay;
};

// Steps `env` from reset(episode_seed) until done.
EpisodeResult run_episode(env::CholecEnv& env, Team& team, std::uint64_t episode_seed, bool record,
                          const std::string& team_label = "");
EpisodeResult run_episode(const env::EnvConfig& config, const TeamSpec& team,
                          std::uint64_t episode_seed, bool record);

struct EvalReport {
  env::EnvConfig config;
  std::string team;
  std::uint64_t seed_base = 0;
  std::vector<EpisodeMetrics> episodes;  // seed order
  Aggregate aggregate;

  std::uint64_t config_hash() const { return env::config_hash(config); }
};

// Episodes use seeds seed_base .. seed_base + n - 1. Replays are collected when `replays` is set.
EvalReport evaluate(const env::EnvConfig& config, const TeamSpec& team, int n_episodes,
                    std::uint64_t seed_base, std::vector<ReplayLog>* replays = nullptr);

// Writes, with <tag> = <config hash>_<first seed>-<last seed>:
//   episodes_<tag>.csv   one row per episode
//   table_<tag>.csv      mean and std per metric (Table I layout)
//   summary_<tag>.json   aggregate, team, config
//   replay_<hash>_<seed>.jsonl for every replay given
// Returns the written paths. Output is a pure function of the inputs.
std::vector<std::filesystem::path> write_report(const EvalReport& report,
                                                const std::vector<ReplayLog>& replays,
                                                const std::filesystem::path& out_dir);

}  // namespace cholec::eval
