#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "cholec/nn/optim.hpp"

namespace cholec::ppo {

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.8;
  double learning_rate = 3e-4;
  double clip_ratio = 0.1;
  int epochs_per_iteration = 4;
  int minibatches_per_epoch = 4;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double grad_clip_norm = 1.0;
  int batch_steps = 2560;
  int n_parallel_envs = 16;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Both agents receive the sum of the two rewards (ablation; off by default).
  bool shared_reward = false;
  std::uint64_t seed = 0;
  // Hidden sizes of the feature-observation network.
  int feature_width = 128;
  int feature_lstm = 64;

  int unroll_length() const { return batch_steps / n_parallel_envs; }
  int lanes_per_minibatch() const { return n_parallel_envs / minibatches_per_epoch; }
  nn::AdamConfig adam() const {
    return {learning_rate, adam_beta1, adam_beta2, adam_eps};
  }
  // Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const PpoConfig& c);
PpoConfig ppo_config_from_json(const nlohmann::json& j);

}  // namespace cholec::ppo
