#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cholec/common/math.hpp"
#include "cholec/env/cholec_env.hpp"

namespace cholec::eval {

inline constexpr double kTicksPerSecond = 30.0;

struct EpisodeMetrics {
  std::uint64_t episode_seed = 0;
  env::Outcome outcome = env::Outcome::kRanOutOfTime;
  bool success = false;
  int steps = 0;
  double time_s = 0.0;  // steps / 30
  double pl_gripper_mm = 0.0;
  double pl_cauter_mm = 0.0;
  int col_gl = 0;  // gripper-liver
  int col_cl = 0;  // cauter-liver
  int col_cg = 0;  // cauter-gallbladder
  int col_ii = 0;  // instrument-instrument
  double return_gripper = 0.0;  // undiscounted reward sums
  double return_cauter = 0.0;
  double final_distance_mm = 0.0;
  double final_visibility = 0.0;
  std::uint64_t final_digest = 0;
};

// Sum of Euclidean distances between consecutive positions.
double path_length(const std::vector<Vec3>& tip_positions);

// Incremental metrics over one trajectory.
class MetricsRecorder {
 public:
  void begin(std::uint64_t episode_seed, const env::StepInfo& initial);
  void record(const env::StepResult& r);
  // Valid once an episode has ended.
  EpisodeMetrics finish(std::uint64_t final_digest) const;

 private:
  EpisodeMetrics m_;
  std::vector<Vec3> gripper_;
  std::vector<Vec3> cauter_;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

Summary summarize(const std::vector<double>& values);

// Table-I style aggregate in seed order.
struct Aggregate {
  int episodes = 0;
  int reached_goal = 0;
  int lost_grasp = 0;
  int ran_out_of_time = 0;
  double success_rate = 0.0;  // percent
  Summary time_s;
  Summary col_gl;
  Summary col_cl;
  Summary col_cg;
  Summary col_ii;
  Summary pl_gripper_mm;
  Summary pl_cauter_mm;
  Summary return_gripper;
  Summary return_cauter;
};

Aggregate aggregate(const std::vector<EpisodeMetrics>& episodes);

}  // namespace cholec::eval
