#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cholec/nn/optim.hpp"
#include "cholec/nn/policy.hpp"

namespace cholec::ppo {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout of an agent checkpoint file:
//   "CHOLECKP" | u32 version | u64 header length | JSON header
//   | per parameter: float32 values | i64 adam step | per parameter: m, v
//   | u64 FNV-1a of everything before it
// The header holds the architecture, tag, counters, config hash and parameter names/shapes.
struct AgentCheckpoint {
  nn::PolicyValueNet<float> net;
  nn::AdamState<float> adam;
  std::int64_t env_steps = 0;
  std::int64_t iteration = 0;
  std::uint64_t config_hash = 0;
};

void save_checkpoint(const nn::PolicyValueNet<float>& net, const nn::AdamState<float>& adam,
                     std::int64_t env_steps, std::int64_t iteration, std::uint64_t config_hash,
                     const std::filesystem::path& path);

// Throws CheckpointError on a bad magic, version, checksum or truncated file.
AgentCheckpoint load_checkpoint(const std::filesystem::path& path);

// Loads into an existing network (and optimizer state when given). The architecture must equal
// net.spec(); on any error nothing is modified.
AgentCheckpoint load_checkpoint_into(const std::filesystem::path& path,
                                     nn::PolicyValueNet<float>& net,
                                     nn::AdamState<float>* adam = nullptr);

}  // namespace cholec::ppo
