#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "cholec/env/config.hpp"
#include "cholec/kinematics/trocar.hpp"
#include "cholec/sim/collision.hpp"
#include "cholec/sim/deformable.hpp"
#include "cholec/sim/geometry.hpp"
#include "cholec/sim/occlusion.hpp"
#include "cholec/sim/scene.hpp"

namespace cholec::env {

enum class Outcome : std::uint8_t { kReachedGoal = 0, kRanOutOfTime = 1, kLostGrasp = 2 };
enum class Instrument : std::uint8_t { kGripper = 0, kCauter = 1 };

std::string to_string(Outcome o);
Outcome outcome_from_string(const std::string& s);
std::string to_string(Instrument i);
Instrument instrument_from_string(const std::string& s);

// Discrete action id (0..8) or continuous axes in [-1, 1]^4.
using InstrumentAction = std::variant<int, kin::Axes>;

struct JointAction {
  InstrumentAction gripper = kin::kNoOpId;
  InstrumentAction cauter = kin::kNoOpId;
};

// Shared observation: either a feature vector (shape {D}) or a CHW image in [0, 1].
struct Observation {
  std::vector<int> shape;
  std::vector<float> values;
};

struct WorldState {
  sim::DeformableBody gallbladder;
  std::vector<sim::GraspBinding> grasp;
  kin::InstrumentPose gripper_pose;
  kin::InstrumentPose cauter_pose;
  int target_index = 0;
  sim::TargetSphere target;
  int step = 0;
  bool done = false;
  std::optional<Outcome> outcome;
  std::uint64_t episode_seed = 0;

  // derived from the configuration above, refreshed every step
  sim::OcclusionResult occlusion;
  sim::CollisionReport collisions;
  int lost_this_step = 0;
  std::uint64_t clamped_axes = 0;
};

// 64-bit hash of the canonicalized dynamic state.
std::uint64_t state_digest(const WorldState& s);

struct StepInfo {
  Vec3 gripper_tip_mm = Vec3::Zero();
  Vec3 cauter_tip_mm = Vec3::Zero();
  double target_distance_mm = 0.0;
  double visible_fraction = 0.0;
  int obstructing_triangles = 0;
  int grasp_count = 0;
  int step = 0;
};

struct StepResult {
  Observation observation;
  double reward_gripper = 0.0;
  double reward_cauter = 0.0;
  bool done = false;
  bool truncated = false;  // ended by the time limit; bootstrap the value
  std::optional<Outcome> outcome;
  sim::CollisionReport collisions;
  StepInfo info;
};

// Quantities the rewards are computed from, for one step.
struct RewardTerms {
  double cauter_target_distance_mm = 0.0;
  double visible_fraction = 0.0;
  int obstructing_triangles = 0;
  int lost_contacts_this_step = 0;
  double gripper_insertion_mm = 0.0;
  sim::CollisionReport collisions;
  bool success = false;
  bool lost_grasp_terminal = false;
};

double reward_cauter(const RewardTerms& t, const RewardWeights& w);
double reward_gripper(const RewardTerms& t, const RewardWeights& w);

// Fixed ordering of the feature observation.
inline constexpr int kFeatureDim = 25;

// Everything derived once from config + scene and shared read-only by environment instances.
struct EnvAssets {
  sim::Scene scene;
  sim::DeformableBody gallbladder_template;
  std::vector<std::vector<sim::TissueAnchor>> grasp_anchors;  // per grasp vertex
  std::unique_ptr<sim::StaticMeshIndex> liver_index;

  static std::shared_ptr<const EnvAssets> build(const EnvConfig& config);
  static std::shared_ptr<const EnvAssets> build(const EnvConfig& config, sim::Scene scene);
};

// Two-instrument cholecystectomy sub-task with reset/step semantics.
class CholecEnv {
 public:
  explicit CholecEnv(EnvConfig config);
  CholecEnv(EnvConfig config, std::shared_ptr<const EnvAssets> assets);

  Observation reset(std::uint64_t episode_seed);
  StepResult step(const JointAction& action);

  Observation observe() const;
  const WorldState& state() const { return state_; }
  // Replaces the state wholesale (tests, checkpoint resume). Derived fields are recomputed.
  void set_state(WorldState s);

  const EnvConfig& config() const { return config_; }
  const sim::Scene& scene() const { return assets_->scene; }
  const std::shared_ptr<const EnvAssets>& assets() const { return assets_; }

  RigidTransform gripper_tip() const;
  RigidTransform cauter_tip() const;
  sim::Capsule gripper_shaft() const;
  sim::Capsule cauter_shaft() const;
  double target_distance_mm() const;
  StepInfo info() const;

 private:
  void refresh_derived();

  EnvConfig config_;
  std::shared_ptr<const EnvAssets> assets_;
  WorldState state_;
};

// Feature vector for a state, every component in [-1, 1].
std::vector<float> feature_observation(const WorldState& s, const CholecEnv& env);

}  // namespace cholec::env
