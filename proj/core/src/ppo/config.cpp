#include "cholec/ppo/config.hpp"

#include <cmath>
#include <string>

#include "cholec/common/errors.hpp"
#include "cholec/common/json_keys.hpp"

namespace cholec::ppo {

void PpoConfig::validate() const {
  const auto require = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(std::string("ppo config: ") + msg);
  };
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda must lie in [0, 1]");
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning_rate must be >= 0");
  require(clip_ratio > 0.0, "clip_ratio must be > 0");
  require(epochs_per_iteration >= 1, "epochs_per_iteration must be >= 1");
  require(minibatches_per_epoch >= 1, "minibatches_per_epoch must be >= 1");
  require(entropy_coef >= 0.0 && value_coef >= 0.0, "loss coefficients must be >= 0");
  require(grad_clip_norm > 0.0, "grad_clip_norm must be > 0");
  require(n_parallel_envs >= 1, "n_parallel_envs must be >= 1");
  require(batch_steps >= n_parallel_envs && batch_steps % n_parallel_envs == 0,
          "batch_steps must be a multiple of n_parallel_envs");
  require(n_parallel_envs % minibatches_per_epoch == 0,
          "n_parallel_envs must be divisible by minibatches_per_epoch");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "adam betas must lie in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be > 0");
  require(feature_width >= 1 && feature_lstm >= 1, "network sizes must be >= 1");
}

nlohmann::json to_json(const PpoConfig& c) {
  return {{"gamma", c.gamma},
          {"gae_lambda", c.gae_lambda},
          {"learning_rate", c.learning_rate},
          {"clip_ratio", c.clip_ratio},
          {"epochs_per_iteration", c.epochs_per_iteration},
          {"minibatches_per_epoch", c.minibatches_per_epoch},
          {"entropy_coef", c.entropy_coef},
          {"value_coef", c.value_coef},
          {"grad_clip_norm", c.grad_clip_norm},
          {"batch_steps", c.batch_steps},
          {"n_parallel_envs", c.n_parallel_envs},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"shared_reward", c.shared_reward},
          {"seed", c.seed},
          {"feature_width", c.feature_width},
          {"feature_lstm", c.feature_lstm}};
}

PpoConfig ppo_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("ppo config: expected an object");
  reject_unknown_keys(j, to_json(PpoConfig{}), "ppo config");
  try {
    PpoConfig c;
    c.gamma = j.value("gamma", c.gamma);
    c.gae_lambda = j.value("gae_lambda", c.gae_lambda);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.clip_ratio = j.value("clip_ratio", c.clip_ratio);
    c.epochs_per_iteration = j.value("epochs_per_iteration", c.epochs_per_iteration);
    c.minibatches_per_epoch = j.value("minibatches_per_epoch", c.minibatches_per_epoch);
    c.entropy_coef = j.value("entropy_coef", c.entropy_coef);
    c.value_coef = j.value("value_coef", c.value_coef);
    c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
    c.batch_steps = j.value("batch_steps", c.batch_steps);
    c.n_parallel_envs = j.value("n_parallel_envs", c.n_parallel_envs);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.shared_reward = j.value("shared_reward", c.shared_reward);
    c.seed = j.value("seed", c.seed);
    c.feature_width = j.value("feature_width", c.feature_width);
    c.feature_lstm = j.value("feature_lstm", c.feature_lstm);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("ppo config: ") + e.what());
  }
}

}  // namespace cholec::ppo
