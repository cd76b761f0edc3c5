#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cholec/env/cholec_env.hpp"
#include "cholec/eval/metrics.hpp"

namespace cholec::eval {

inline constexpr int kReplayVersion = 1;

// One episode as JSON lines:
//   {"type":"header","version":1,"config_hash":"..","episode_seed":n,"team":"..","config":{..},
//    "initial_digest":".."}
//   {"type":"step","t":0,"gripper":7,"cauter":[0.5,0,0,-1],"digest":".."}   one per step
// Discrete actions are ids, continuous actions are 4-vectors (pan, tilt, spin, insertion).
struct ReplayLog {
  std::uint64_t config_hash = 0;
  nlohmann::json config;  // EnvConfig
  std::uint64_t episode_seed = 0;
  std::string team;
  std::uint64_t initial_digest = 0;
  std::vector<env::JointAction> actions;
  std::vector<std::uint64_t> digests;  // after each step
};

std::string to_jsonl(const ReplayLog& log);
ReplayLog replay_from_jsonl(const std::string& text);
void save_replay(const ReplayLog& log, const std::filesystem::path& path);
ReplayLog load_replay(const std::filesystem::path& path);

struct ReplayCheck {
  bool matches = false;
  int steps = 0;
  int first_mismatch = -1;  // 0: the reset state, k: the state after step k; -1 if none
  EpisodeMetrics metrics;
};

using StepObserver = std::function<void(const env::CholecEnv&, const env::StepResult&)>;

// Re-runs the logged actions on a fresh environment built from the logged config and compares
// every digest. Throws ConfigError when the config does not hash to the stored value.
ReplayCheck run_replay(const ReplayLog& log, const StepObserver& observer = {});

}  // namespace cholec::eval
