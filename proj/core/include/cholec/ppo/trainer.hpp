#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cholec/env/cholec_env.hpp"
#include "cholec/nn/optim.hpp"
#include "cholec/nn/policy.hpp"
#include "cholec/ppo/config.hpp"

namespace cholec::ppo {

inline constexpr int kNumAgents = 2;  // 0 gripper, 1 cauter

// Trajectory data of one agent. Arrays are time-major: entry t * lanes + i is step t of lane i.
struct AgentRollout {
  std::vector<int> actions;
  std::vector<int> prev_actions;  // own previous action, -1 at an episode start
  std::vector<double> log_probs;  // behavior policy
  std::vector<double> values;
  std::vector<double> rewards;
  // V(s_{t+1}) for truncated steps and for the last step of every lane; 0 elsewhere.
  std::vector<double> bootstrap_values;
  nn::RecurrentState<float> initial;  // [lanes, hidden] at the start of the segment
};

struct CompletedEpisode {
  int lane = 0;
  std::uint64_t episode_seed = 0;
  env::Outcome outcome = env::Outcome::kRanOutOfTime;
  int steps = 0;
  std::array<double, kNumAgents> discounted_return{};
};

struct RolloutBatch {
  int steps = 0;
  int lanes = 0;
  nn::Matrix<float> observations;  // shared by both agents, [steps * lanes, obs]
  std::vector<std::uint8_t> resets;  // the row is the first step of an episode
  std::vector<std::uint8_t> dones;
  std::vector<std::uint8_t> truncations;
  std::array<AgentRollout, kNumAgents> agents;
  std::vector<CompletedEpisode> completed;

  int rows() const { return steps * lanes; }
};

struct AgentStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;            // mean pre-clip global norm over minibatches
  double max_clipped_grad_norm = 0.0;  // largest global norm after clipping
  double advantage_mean = 0.0;       // after normalization
  double advantage_std = 0.0;
  double mean_return = 0.0;          // discounted, over episodes completed this iteration
  int optimizer_steps = 0;
};

struct TrainStats {
  std::int64_t iteration = 0;
  std::int64_t env_steps = 0;  // total after this iteration
  int iteration_steps = 0;
  int episodes = 0;
  int reached_goal = 0;
  int lost_grasp = 0;
  int ran_out_of_time = 0;
  std::array<AgentStats, kNumAgents> agents;

  double fraction(env::Outcome o) const;
};

std::string telemetry_header();
std::string telemetry_row(const TrainStats& s);

// Independent PPO for the gripper and cauter agents over n_parallel_envs environment lanes.
class Trainer {
 public:
  Trainer(env::EnvConfig env_config, PpoConfig config);

  // One collect + update cycle.
  TrainStats iteration();

  // Rollout of unroll_length steps on every lane with the current parameters.
  RolloutBatch collect();
  // Epochs x minibatches of recurrent updates on a collected batch.
  void update(const RolloutBatch& batch, TrainStats& stats);

  nn::PolicyValueNet<float>& net(int agent) { return nets_[agent]; }
  const nn::PolicyValueNet<float>& net(int agent) const { return nets_[agent]; }
  nn::AdamState<float>& optimizer(int agent) { return adam_[agent]; }
  const env::EnvConfig& env_config() const { return env_config_; }
  const PpoConfig& config() const { return config_; }
  std::int64_t env_steps() const { return env_steps_; }
  std::int64_t iterations() const { return iteration_; }
  // Hash over the environment and PPO configurations, stored in checkpoints.
  std::uint64_t config_hash() const;

  // Multiplies an agent's loss before differentiation (1 by default; 0 freezes the agent).
  void set_loss_scale(int agent, double scale) { loss_scale_[agent] = scale; }

  void save_checkpoints(const std::filesystem::path& gripper,
                        const std::filesystem::path& cauter) const;
  void load_checkpoints(const std::filesystem::path& gripper, const std::filesystem::path& cauter);
  // Everything besides the networks needed for an exact resume: lane states, RNGs, counters.
  void save_state(const std::filesystem::path& path) const;
  void load_state(const std::filesystem::path& path);

  static nn::ArchSpec architecture(const env::EnvConfig& env_config, const PpoConfig& config);

 private:
  struct Lane {
    std::unique_ptr<env::CholecEnv> env;
    std::mt19937_64 rng;
    std::uint64_t episodes_started = 0;
    bool needs_reset = true;
    std::vector<float> observation;
    std::array<int, kNumAgents> prev_action{-1, -1};
    std::array<double, kNumAgents> discounted_return{};
    double discount = 1.0;
  };

  std::uint64_t episode_seed(int lane, std::uint64_t index) const;
  void start_episode(Lane& lane, int index);

  env::EnvConfig env_config_;
  PpoConfig config_;
  std::shared_ptr<const env::EnvAssets> assets_;
  std::vector<Lane> lanes_;
  std::array<nn::PolicyValueNet<float>, kNumAgents> nets_;
  std::array<nn::AdamState<float>, kNumAgents> adam_;
  std::array<nn::RecurrentState<float>, kNumAgents> recurrent_;
  std::array<double, kNumAgents> loss_scale_{1.0, 1.0};
  std::mt19937_64 shuffle_rng_;
  std::int64_t env_steps_ = 0;
  std::int64_t iteration_ = 0;
};

}  // namespace cholec::ppo
