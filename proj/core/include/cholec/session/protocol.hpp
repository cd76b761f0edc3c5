#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cholec/env/cholec_env.hpp"
#include "cholec/eval/metrics.hpp"

namespace cholec::session {

inline constexpr int kSchemaVersion = 1;
inline constexpr int kMaxFrameVertices = 100;

// Client -> server. Axes are (pan, tilt, spin, insertion) in [-1, 1]; values outside are clamped.
struct InputMessage {
  std::string client_id;
  env::Instrument instrument = env::Instrument::kGripper;
  kin::Axes axes{0.0, 0.0, 0.0, 0.0};
  bool switch_instrument = false;
  bool reset_episode = false;
  double client_timestamp = 0.0;
  int clamped_axes = 0;  // set by parsing
};

// Throws ContractError on a malformed message or a schema version mismatch.
InputMessage parse_input(const nlohmann::json& j);
nlohmann::json to_json(const InputMessage& m);

struct InstrumentFrame {
  kin::InstrumentPose pose;
  Vec3 tip_mm = Vec3::Zero();
};

// Server -> client, once per tick.
struct StateFrame {
  std::int64_t tick = 0;  // strictly increasing over the session
  int episode = 0;
  int step = 0;
  std::uint64_t episode_seed = 0;
  InstrumentFrame gripper;
  InstrumentFrame cauter;
  std::vector<Vec3> gallbladder;  // at most kMaxFrameVertices
  Vec3 target_mm = Vec3::Zero();
  double target_radius_mm = 0.0;
  double visible_fraction = 0.0;
  double reward_gripper = 0.0;
  double reward_cauter = 0.0;
  double cumulative_gripper = 0.0;
  double cumulative_cauter = 0.0;
  int grasp_count = 0;
  sim::CollisionReport collisions;
  std::optional<env::Outcome> outcome;
  bool paused = false;
  std::optional<env::Instrument> active_instrument;  // switch-control mode only
  std::uint64_t digest = 0;
};

nlohmann::json to_json(const StateFrame& f);

// Frame fields that come from the environment alone (poses, mesh, target, grasp, digest).
StateFrame make_state_frame(const env::CholecEnv& env);

// Evenly spaced subset of at most `max_points` vertices, first vertex always included.
std::vector<Vec3> decimate(const std::vector<Vec3>& vertices, int max_points = kMaxFrameVertices);

nlohmann::json episode_summary_json(int episode, const eval::EpisodeMetrics& m);
nlohmann::json warning_json(const std::string& message);
nlohmann::json error_json(const std::string& message);

}  // namespace cholec::session
