#include "cholec/eval/metrics.hpp"

#include <cmath>

#include "cholec/common/errors.hpp"

namespace cholec::eval {

double path_length(const std::vector<Vec3>& tip_positions) {
  double total = 0.0;
  for (std::size_t i = 1; i < tip_positions.size(); ++i) {
    total += (tip_positions[i] - tip_positions[i - 1]).norm();
  }
  return total;
}

void MetricsRecorder::begin(std::uint64_t episode_seed, const env::StepInfo& initial) {
  m_ = EpisodeMetrics{};
  m_.episode_seed = episode_seed;
  m_.final_distance_mm = initial.target_distance_mm;
  m_.final_visibility = initial.visible_fraction;
  gripper_.assign(1, initial.gripper_tip_mm);
  cauter_.assign(1, initial.cauter_tip_mm);
}

void MetricsRecorder::record(const env::StepResult& r) {
  ++m_.steps;
  gripper_.push_back(r.info.gripper_tip_mm);
  cauter_.push_back(r.info.cauter_tip_mm);
  m_.col_gl += r.collisions.gripper_liver.collided ? 1 : 0;
  m_.col_cl += r.collisions.cauter_liver.collided ? 1 : 0;
  m_.col_cg += r.collisions.cauter_gallbladder.collided ? 1 : 0;
  m_.col_ii += r.collisions.instrument_instrument.collided ? 1 : 0;
  m_.return_gripper += r.reward_gripper;
  m_.return_cauter += r.reward_cauter;
  m_.final_distance_mm = r.info.target_distance_mm;
  m_.final_visibility = r.info.visible_fraction;
  if (r.outcome) m_.outcome = *r.outcome;
}

EpisodeMetrics MetricsRecorder::finish(std::uint64_t final_digest) const {
  EpisodeMetrics m = m_;
  m.success = m.outcome == env::Outcome::kReachedGoal;
  m.time_s = m.steps / kTicksPerSecond;
  m.pl_gripper_mm = path_length(gripper_);
  m.pl_cauter_mm = path_length(cauter_);
  m.final_digest = final_digest;
  return m;
}

Summary summarize(const std::vector<double>& values) {
  if (values.empty()) return {};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

Aggregate aggregate(const std::vector<EpisodeMetrics>& episodes) {
  if (episodes.empty()) throw ContractError("aggregate: no episodes");
  Aggregate a;
  a.episodes = static_cast<int>(episodes.size());
  const auto column = [&](auto field) {
    std::vector<double> v;
    v.reserve(episodes.size());
    for (const auto& e : episodes) v.push_back(static_cast<double>(field(e)));
    return summarize(v);
  };
  for (const auto& e : episodes) {
    a.reached_goal += e.outcome == env::Outcome::kReachedGoal ? 1 : 0;
    a.lost_grasp += e.outcome == env::Outcome::kLostGrasp ? 1 : 0;
    a.ran_out_of_time += e.outcome == env::Outcome::kRanOutOfTime ? 1 : 0;
  }
  a.success_rate = 100.0 * a.reached_goal / a.episodes;
  a.time_s = column([](const EpisodeMetrics& e) { return e.time_s; });
  a.col_gl = column([](const EpisodeMetrics& e) { return e.col_gl; });
  a.col_cl = column([](const EpisodeMetrics& e) { return e.col_cl; });
  a.col_cg = column([](const EpisodeMetrics& e) { return e.col_cg; });
  a.col_ii = column([](const EpisodeMetrics& e) { return e.col_ii; });
  a.pl_gripper_mm = column([](const EpisodeMetrics& e) { return e.pl_gripper_mm; });
  a.pl_cauter_mm = column([](const EpisodeMetrics& e) { return e.pl_cauter_mm; });
  a.return_gripper = column([](const EpisodeMetrics& e) { return e.return_gripper; });
  a.return_cauter = column([](const EpisodeMetrics& e) { return e.return_cauter; });
  return a;
}

}  // namespace cholec::eval
