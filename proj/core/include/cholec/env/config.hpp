#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "cholec/kinematics/trocar.hpp"
#include "cholec/sim/deformable.hpp"

namespace cholec::env {

inline constexpr int kEnvConfigSchemaVersion = 1;

enum class ObsMode { kImage, kFeatures };

std::string to_string(ObsMode m);
ObsMode obs_mode_from_string(const std::string& s);

// Weights of the per-agent reward terms. Distances in mm, counts per step.
struct RewardWeights {
  double dist_per_mm = 0.002;
  double visibility = 0.1;
  double obstruct_per_triangle = 0.002;
  double lost_per_contact = 1.0;
  double insert_per_mm = 0.0005;
  double col_gripper_liver = 0.1;
  double col_cauter_liver = 0.1;
  double col_cauter_gallbladder = 0.1;
  double col_instruments = 0.1;
  double success = 10.0;
  double grasp_lost_terminal = 10.0;
};

struct JitterConfig {
  double gripper_angle_deg = 2.0;
  double gripper_insertion_mm = 2.0;
  double cauter_angle_deg = 5.0;
  double cauter_insertion_mm = 5.0;
};

struct EnvConfig {
  std::int64_t seed = 0;
  ObsMode obs_mode = ObsMode::kFeatures;
  int image_width = 64;
  int image_height = 64;
  int time_limit_steps = 1000;
  double success_tolerance_mm = 5.0;
  double visibility_success_threshold = 0.5;
  RewardWeights weights;
  JitterConfig jitter;
  int n_rays = 32;

  double dt_s = 1.0 / 30.0;
  int substeps = 4;
  // Steps the gallbladder is relaxed under gravity with the canonical grasp before episodes.
  int settle_steps = 150;
  sim::PhysicsParams physics;
  double grasp_break_threshold_mm = 5.0;
  double tissue_extensibility = 1.0;
  double instrument_radius_mm = 2.5;
  double tissue_offset_mm = 0.5;
  kin::DofLimits limits;
  kin::Axes continuous_scale = kin::kDefaultContinuousScale;
  std::string scene_path;  // empty: procedural default scene

  // Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const EnvConfig& c);
EnvConfig env_config_from_json(const nlohmann::json& j);
EnvConfig load_env_config(const std::filesystem::path& path);
void save_env_config(const EnvConfig& c, const std::filesystem::path& path);

// Hash of the canonical JSON serialization.
std::uint64_t config_hash(const EnvConfig& c);

}  // namespace cholec::env
