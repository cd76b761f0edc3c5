#include "cholec/env/cholec_env.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cholec/common/errors.hpp"
#include "cholec/common/hash.hpp"
#include "cholec/env/render.hpp"

namespace cholec::env {

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::kReachedGoal:
      return "ReachedGoal";
    case Outcome::kRanOutOfTime:
      return "RanOutOfTime";
    case Outcome::kLostGrasp:
      return "LostGrasp";
  }
  return "?";
}

Outcome outcome_from_string(const std::string& s) {
  if (s == "ReachedGoal") return Outcome::kReachedGoal;
  if (s == "RanOutOfTime") return Outcome::kRanOutOfTime;
  if (s == "LostGrasp") return Outcome::kLostGrasp;
  throw ContractError("unknown outcome '" + s + "'");
}

std::string to_string(Instrument i) { return i == Instrument::kGripper ? "gripper" : "cauter"; }

Instrument instrument_from_string(const std::string& s) {
  if (s == "gripper") return Instrument::kGripper;
  if (s == "cauter") return Instrument::kCauter;
  throw ContractError("unknown instrument '" + s + "'");
}

std::uint64_t state_digest(const WorldState& s) {
  Fnv1a h;
  h.u64(s.gallbladder.vertices.size());
  for (const auto& v : s.gallbladder.vertices) h.f64s({v.data(), 3});
  for (const auto& v : s.gallbladder.velocities) h.f64s({v.data(), 3});
  h.u64(s.grasp.size());
  for (const auto& g : s.grasp) {
    h.i64(g.vertex_id);
    h.f64s({g.local_offset_mm.data(), 3});
    h.f64(g.elongation_mm);
    h.u64(g.broken ? 1 : 0);
  }
  for (const auto* p : {&s.gripper_pose, &s.cauter_pose}) {
    h.f64(p->pan_deg);
    h.f64(p->tilt_deg);
    h.f64(p->spin_deg);
    h.f64(p->insertion_mm);
  }
  h.i64(s.target_index);
  h.i64(s.step);
  h.u64(s.done ? 1 : 0);
  h.i64(s.outcome ? static_cast<int>(*s.outcome) : -1);
  h.u64(s.episode_seed);
  return h.value();
}

double reward_cauter(const RewardTerms& t, const RewardWeights& w) {
  double r = -w.dist_per_mm * t.cauter_target_distance_mm;
  if (t.collisions.cauter_liver.collided) r -= w.col_cauter_liver;
  if (t.collisions.cauter_gallbladder.collided) r -= w.col_cauter_gallbladder;
  if (t.collisions.instrument_instrument.collided) r -= w.col_instruments;
  if (t.success) r += w.success;
  return r;
}

double reward_gripper(const RewardTerms& t, const RewardWeights& w) {
  double r = w.visibility * t.visible_fraction;
  r -= w.obstruct_per_triangle * t.obstructing_triangles;
  r -= w.lost_per_contact * t.lost_contacts_this_step;
  r -= w.insert_per_mm * t.gripper_insertion_mm;
  if (t.collisions.gripper_liver.collided) r -= w.col_gripper_liver;
  if (t.collisions.instrument_instrument.collided) r -= w.col_instruments;
  if (t.success) r += w.success;
  if (t.lost_grasp_terminal) r -= w.grasp_lost_terminal;
  return r;
}

std::shared_ptr<const EnvAssets> EnvAssets::build(const EnvConfig& config) {
  config.validate();
  sim::Scene scene =
      config.scene_path.empty() ? sim::make_default_scene() : sim::load_scene(config.scene_path);
  return build(config, std::move(scene));
}

std::shared_ptr<const EnvAssets> EnvAssets::build(const EnvConfig& config, sim::Scene scene) {
  config.validate();
  scene.validate();
  auto a = std::make_shared<EnvAssets>();
  a->scene = std::move(scene);
  a->gallbladder_template = sim::DeformableBody::from_rest_mesh(
      a->scene.gallbladder, a->scene.fixed_vertices, a->scene.gallbladder_mass_kg);
  for (int v : a->scene.grasp_vertices) {
    a->grasp_anchors.push_back(sim::make_anchors(a->gallbladder_template, v));
  }
  if (config.settle_steps > 0) {
    // Relax the body under gravity while held at the canonical grasp, then drop the momentum.
    sim::DeformableBody& body = a->gallbladder_template;
    const RigidTransform tip = kin::tip_transform(a->scene.gripper.trocar, a->scene.gripper.start);
    const Mat3 inv_rot = tip.rotation.transpose();
    std::vector<sim::GraspBinding> pins;
    for (int v : a->scene.grasp_vertices) {
      sim::GraspBinding g;
      g.vertex_id = v;
      g.local_offset_mm = inv_rot * (body.vertices[v] - tip.translation);
      pins.push_back(g);
    }
    for (int k = 0; k < config.settle_steps; ++k) {
      sim::step_physics_inplace(body, pins, tip, config.dt_s, config.substeps, config.physics);
    }
    for (auto& v : body.velocities) v.setZero();
  }
  a->liver_index = std::make_unique<sim::StaticMeshIndex>(a->scene.liver);
  return a;
}

CholecEnv::CholecEnv(EnvConfig config) : CholecEnv(config, EnvAssets::build(config)) {}

CholecEnv::CholecEnv(EnvConfig config, std::shared_ptr<const EnvAssets> assets)
    : config_(std::move(config)), assets_(std::move(assets)) {
  config_.validate();
  if (!assets_) throw ConfigError("environment assets missing");
  state_.gallbladder = assets_->gallbladder_template;
  state_.done = true;  // must reset before stepping
}

namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double symmetric(std::mt19937_64& rng, double magnitude) {
  return magnitude * (2.0 * unit_uniform(rng) - 1.0);
}

kin::InstrumentPose jitter_pose(const kin::InstrumentPose& p, double angle, double insertion,
                                std::mt19937_64& rng, const kin::DofLimits& limits) {
  kin::InstrumentPose q = p;
  q.pan_deg += symmetric(rng, angle);
  q.tilt_deg += symmetric(rng, angle);
  q.insertion_mm += symmetric(rng, insertion);
  return limits.clamp(q);
}

kin::InstrumentPose apply_action(const kin::InstrumentPose& pose, const InstrumentAction& action,
                                 const EnvConfig& cfg, std::uint64_t* clamped) {
  if (const int* id = std::get_if<int>(&action)) return kin::apply_discrete(pose, *id, cfg.limits);
  return kin::apply_continuous(pose, std::get<kin::Axes>(action), cfg.continuous_scale, cfg.limits,
                               clamped);
}

}  // namespace

Observation CholecEnv::reset(std::uint64_t episode_seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(config_.seed),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(config_.seed) >> 32),
                    static_cast<std::uint32_t>(episode_seed),
                    static_cast<std::uint32_t>(episode_seed >> 32)};
  std::mt19937_64 rng(seq);
  const auto& scene = assets_->scene;

  WorldState s;
  s.episode_seed = episode_seed;
  s.target_index = static_cast<int>(rng() % scene.targets.size());
  s.target = {scene.targets[s.target_index], scene.target_radius_mm};
  s.gripper_pose = jitter_pose(scene.gripper.start, config_.jitter.gripper_angle_deg,
                               config_.jitter.gripper_insertion_mm, rng, config_.limits);
  s.cauter_pose = jitter_pose(scene.cauter.start, config_.jitter.cauter_angle_deg,
                              config_.jitter.cauter_insertion_mm, rng, config_.limits);
  s.gallbladder = assets_->gallbladder_template;

  const RigidTransform tip = kin::tip_transform(scene.gripper.trocar, s.gripper_pose);
  const Mat3 inv_rot = tip.rotation.transpose();
  for (std::size_t k = 0; k < scene.grasp_vertices.size(); ++k) {
    sim::GraspBinding g;
    g.vertex_id = scene.grasp_vertices[k];
    g.local_offset_mm = inv_rot * (s.gallbladder.vertices[g.vertex_id] - tip.translation);
    g.anchors = assets_->grasp_anchors[k];
    s.grasp.push_back(std::move(g));
  }
  state_ = std::move(s);
  refresh_derived();
  for (auto& g : state_.grasp) {
    g.elongation_mm = sim::binding_elongation(g, state_.gallbladder, gripper_tip(),
                                              config_.tissue_extensibility);
  }
  return observe();
}

void CholecEnv::set_state(WorldState s) {
  state_ = std::move(s);
  refresh_derived();
}

RigidTransform CholecEnv::gripper_tip() const {
  return kin::tip_transform(assets_->scene.gripper.trocar, state_.gripper_pose);
}

RigidTransform CholecEnv::cauter_tip() const {
  return kin::tip_transform(assets_->scene.cauter.trocar, state_.cauter_pose);
}

sim::Capsule CholecEnv::gripper_shaft() const {
  return {assets_->scene.gripper.trocar.pivot_mm, gripper_tip().translation,
          config_.instrument_radius_mm};
}

sim::Capsule CholecEnv::cauter_shaft() const {
  return {assets_->scene.cauter.trocar.pivot_mm, cauter_tip().translation,
          config_.instrument_radius_mm};
}

double CholecEnv::target_distance_mm() const {
  return (cauter_tip().translation - state_.target.center_mm).norm();
}

void CholecEnv::refresh_derived() {
  state_.occlusion =
      sim::occlusion_query(state_.gallbladder.vertices, state_.gallbladder.triangles,
                           assets_->scene.camera.position_mm, state_.target, config_.n_rays);
  state_.collisions = sim::detect_collisions(
      state_.gallbladder.vertices, state_.gallbladder.triangles, *assets_->liver_index,
      gripper_shaft(), cauter_shaft(), {config_.tissue_offset_mm});
}

StepInfo CholecEnv::info() const {
  StepInfo i;
  i.gripper_tip_mm = gripper_tip().translation;
  i.cauter_tip_mm = cauter_tip().translation;
  i.target_distance_mm = (i.cauter_tip_mm - state_.target.center_mm).norm();
  i.visible_fraction = state_.occlusion.visible_fraction;
  i.obstructing_triangles = state_.occlusion.obstructing_triangles;
  i.grasp_count = sim::count_unbroken(state_.grasp);
  i.step = state_.step;
  return i;
}

StepResult CholecEnv::step(const JointAction& action) {
  if (state_.done) throw ContractError("step called on a finished episode; call reset first");
  WorldState& s = state_;
  s.gripper_pose = apply_action(s.gripper_pose, action.gripper, config_, &s.clamped_axes);
  s.cauter_pose = apply_action(s.cauter_pose, action.cauter, config_, &s.clamped_axes);

  const RigidTransform gtip = gripper_tip();
  try {
    sim::step_physics_inplace(s.gallbladder, s.grasp, gtip, config_.dt_s, config_.substeps,
                              config_.physics);
  } catch (const SimulationDiverged& e) {
    std::ostringstream msg;
    msg << e.what() << " (episode seed " << s.episode_seed << ", step " << s.step << ")";
    throw SimulationDiverged(msg.str());
  }
  const int before = sim::count_unbroken(s.grasp);
  s.grasp = sim::update_grasp(std::move(s.grasp), s.gallbladder, gtip,
                              config_.grasp_break_threshold_mm, config_.tissue_extensibility);
  const int unbroken = sim::count_unbroken(s.grasp);
  s.lost_this_step = before - unbroken;
  refresh_derived();
  ++s.step;

  RewardTerms terms;
  terms.cauter_target_distance_mm = target_distance_mm();
  terms.visible_fraction = s.occlusion.visible_fraction;
  terms.obstructing_triangles = s.occlusion.obstructing_triangles;
  terms.lost_contacts_this_step = s.lost_this_step;
  terms.gripper_insertion_mm = s.gripper_pose.insertion_mm;
  terms.collisions = s.collisions;

  StepResult r;
  if (terms.cauter_target_distance_mm <= config_.success_tolerance_mm &&
      terms.visible_fraction >= config_.visibility_success_threshold) {
    s.outcome = Outcome::kReachedGoal;
    terms.success = true;
  } else if (unbroken == 0) {
    s.outcome = Outcome::kLostGrasp;
    terms.lost_grasp_terminal = true;
  } else if (s.step >= config_.time_limit_steps) {
    s.outcome = Outcome::kRanOutOfTime;
    r.truncated = true;
  }
  s.done = s.outcome.has_value();

  r.reward_gripper = reward_gripper(terms, config_.weights);
  r.reward_cauter = reward_cauter(terms, config_.weights);
  r.done = s.done;
  r.outcome = s.outcome;
  r.collisions = s.collisions;
  r.info = info();
  r.observation = observe();
  return r;
}

Observation CholecEnv::observe() const {
  Observation o;
  if (config_.obs_mode == ObsMode::kFeatures) {
    o.shape = {kFeatureDim};
    o.values = feature_observation(state_, *this);
  } else {
    const Image img = render_scene(*this, config_.image_width, config_.image_height);
    o.shape = {3, img.height, img.width};
    o.values = img.to_chw_float();
  }
  return o;
}

std::vector<float> feature_observation(const WorldState& s, const CholecEnv& env) {
  const auto& lim = env.config().limits;
  const auto half = [](const kin::Interval& i) { return 0.5 * (i.upper - i.lower); };
  const auto mid = [](const kin::Interval& i) { return 0.5 * (i.upper + i.lower); };
  const auto norm = [](double v, double center, double scale) {
    return scale > 0.0 ? std::clamp((v - center) / scale, -1.0, 1.0) : 0.0;
  };
  constexpr double kPositionScale = 100.0;  // mm
  std::vector<float> f;
  f.reserve(kFeatureDim);
  for (const auto* p : {&s.gripper_pose, &s.cauter_pose}) {
    f.push_back(static_cast<float>(norm(p->pan_deg, mid(lim.pan), half(lim.pan))));
    f.push_back(static_cast<float>(norm(p->tilt_deg, mid(lim.tilt), half(lim.tilt))));
    f.push_back(static_cast<float>(norm(p->spin_deg, mid(lim.spin), half(lim.spin))));
    f.push_back(static_cast<float>(norm(p->insertion_mm, mid(lim.insertion), half(lim.insertion))));
  }
  const Vec3 gtip = env.gripper_tip().translation;
  const Vec3 ctip = env.cauter_tip().translation;
  for (const Vec3* v : {&gtip, &ctip, &s.target.center_mm}) {
    for (int k = 0; k < 3; ++k) f.push_back(static_cast<float>(norm((*v)[k], 0.0, kPositionScale)));
  }
  const Vec3 to_target = s.target.center_mm - ctip;
  for (int k = 0; k < 3; ++k) f.push_back(static_cast<float>(norm(to_target[k], 0.0, kPositionScale)));
  f.push_back(static_cast<float>(norm(to_target.norm(), 0.0, kPositionScale)));
  f.push_back(static_cast<float>(s.occlusion.visible_fraction));
  f.push_back(static_cast<float>(norm(s.occlusion.obstructing_triangles, 0.0, 50.0)));
  const double n_bind = static_cast<double>(std::max<std::size_t>(1, s.grasp.size()));
  f.push_back(static_cast<float>(sim::count_unbroken(s.grasp) / n_bind));
  f.push_back(static_cast<float>(
      norm(s.step, 0.0, static_cast<double>(env.config().time_limit_steps))));
  return f;
}

}  // namespace cholec::env
