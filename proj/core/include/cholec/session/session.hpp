#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cholec/env/cholec_env.hpp"
#include "cholec/eval/controller.hpp"
#include "cholec/eval/metrics.hpp"
#include "cholec/session/protocol.hpp"

namespace cholec::session {

struct SessionConfig {
  eval::TeamSpec team;
  env::EnvConfig env;
  int tick_rate_hz = 30;
  std::uint16_t port = 8765;
  std::string bind_address = "127.0.0.1";
  int max_session_episodes = 0;  // 0: unlimited
  std::uint64_t seed_base = 0;   // episode k uses seed_base + k
  // Multiplies the per-tick displacement of saturated human input.
  double input_gain = 1.0;

  // Throws ConfigError; the tick rate is fixed at 30.
  void validate() const;
};

nlohmann::json to_json(const SessionConfig& c);

// Everything the service sends after one tick.
struct TickOutput {
  std::vector<nlohmann::json> messages;  // state frame first, then summaries or warnings
  StateFrame frame;
  std::optional<eval::EpisodeMetrics> finished;  // the episode that ended this tick
};

// The authoritative simulation loop, free of any networking.
//
// Inputs land in per-instrument latest-value slots; each tick consumes at most one value per
// slot, and an empty slot means zero axes. Button presses are latched until the next tick.
// After an episode ends the session pauses until a reset is requested.
class SessionCore : public eval::InputSource {
 public:
  explicit SessionCore(SessionConfig config);
  // For tests: explicit controllers instead of the configured team.
  SessionCore(SessionConfig config, std::unique_ptr<eval::Controller> gripper,
              std::unique_ptr<eval::Controller> cauter);

  // Thread-safe.
  void submit(const InputMessage& m);
  // Thread-safe. The instrument falls back to zero axes; a warning is sent with the next tick.
  void disconnect(env::Instrument instrument, const std::string& client_id);

  TickOutput tick();

  const SessionConfig& config() const { return config_; }
  const env::CholecEnv& environment() const { return env_; }
  bool paused() const { return paused_; }
  // The episode limit was reached; no further episodes will start.
  bool finished() const { return finished_; }
  int episode() const { return episode_; }
  std::int64_t ticks() const { return tick_; }

  // Human controllers read the axes consumed for the current tick here.
  std::optional<kin::Axes> axes(env::Instrument instrument) override;

 private:
  void start_episode();
  StateFrame make_frame(const env::StepResult* r) const;

  SessionConfig config_;
  env::CholecEnv env_;
  std::unique_ptr<eval::Team> team_;
  env::Observation obs_;
  eval::MetricsRecorder recorder_;

  std::mutex mutex_;
  std::array<std::optional<kin::Axes>, 2> pending_;
  bool pending_switch_ = false;
  bool pending_reset_ = false;
  std::vector<std::string> pending_warnings_;

  std::array<std::optional<kin::Axes>, 2> current_;  // consumed by the controllers this tick
  std::int64_t tick_ = 0;
  int episode_ = 0;
  bool paused_ = false;
  bool finished_ = false;
  double cumulative_gripper_ = 0.0;
  double cumulative_cauter_ = 0.0;
};

}  // namespace cholec::session
