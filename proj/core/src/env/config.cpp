#include "cholec/env/config.hpp"

#include <cmath>
#include <fstream>

#include "cholec/common/errors.hpp"
#include "cholec/common/hash.hpp"
#include "cholec/common/json_keys.hpp"

namespace cholec::env {

std::string to_string(ObsMode m) { return m == ObsMode::kImage ? "image" : "features"; }

ObsMode obs_mode_from_string(const std::string& s) {
  if (s == "image") return ObsMode::kImage;
  if (s == "features") return ObsMode::kFeatures;
  throw ConfigError("obs_mode must be 'image' or 'features', got '" + s + "'");
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("env config: " + what);
}

bool finite(double v) { return std::isfinite(v); }

nlohmann::json interval_json(const kin::Interval& i) { return {i.lower, i.upper}; }

kin::Interval json_interval(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

}  // namespace

void EnvConfig::validate() const {
  require(time_limit_steps >= 1, "time_limit_steps must be >= 1");
  require(success_tolerance_mm > 0.0, "success_tolerance_mm must be > 0");
  require(visibility_success_threshold >= 0.0 && visibility_success_threshold <= 1.0,
          "visibility_success_threshold must be in [0, 1]");
  require(image_width >= 8 && image_height >= 8, "image size must be at least 8x8");
  require(n_rays >= 1, "n_rays must be >= 1");
  require(dt_s > 0.0 && substeps >= 1, "dt_s > 0 and substeps >= 1 required");
  require(settle_steps >= 0, "settle_steps must be >= 0");
  require(grasp_break_threshold_mm > 0.0, "grasp_break_threshold_mm must be > 0");
  require(tissue_extensibility > 0.0, "tissue_extensibility must be > 0");
  require(instrument_radius_mm > 0.0 && tissue_offset_mm >= 0.0, "collision offsets invalid");
  require(limits.valid(), "DOF limits must satisfy lower <= upper and insertion >= 0");
  require(physics.constraint_iterations >= 1, "constraint_iterations must be >= 1");
  const RewardWeights& w = weights;
  for (double v : {w.dist_per_mm, w.visibility, w.obstruct_per_triangle, w.lost_per_contact,
                   w.insert_per_mm, w.col_gripper_liver, w.col_cauter_liver,
                   w.col_cauter_gallbladder, w.col_instruments, w.success, w.grasp_lost_terminal}) {
    require(finite(v), "reward weights must be finite");
  }
  for (double v : {jitter.gripper_angle_deg, jitter.gripper_insertion_mm, jitter.cauter_angle_deg,
                   jitter.cauter_insertion_mm}) {
    require(finite(v) && v >= 0.0, "jitter magnitudes must be finite and >= 0");
  }
  for (double v : continuous_scale) require(finite(v) && v >= 0.0, "continuous_scale invalid");
}

nlohmann::json to_json(const EnvConfig& c) {
  const RewardWeights& w = c.weights;
  return {
      {"schema_version", kEnvConfigSchemaVersion},
      {"seed", c.seed},
      {"obs_mode", to_string(c.obs_mode)},
      {"image_size", {c.image_width, c.image_height}},
      {"time_limit_steps", c.time_limit_steps},
      {"success_tolerance_mm", c.success_tolerance_mm},
      {"visibility_success_threshold", c.visibility_success_threshold},
      {"reward_weights",
       {{"dist_per_mm", w.dist_per_mm},
        {"visibility", w.visibility},
        {"obstruct_per_triangle", w.obstruct_per_triangle},
        {"lost_per_contact", w.lost_per_contact},
        {"insert_per_mm", w.insert_per_mm},
        {"col_gripper_liver", w.col_gripper_liver},
        {"col_cauter_liver", w.col_cauter_liver},
        {"col_cauter_gallbladder", w.col_cauter_gallbladder},
        {"col_instruments", w.col_instruments},
        {"success", w.success},
        {"grasp_lost_terminal", w.grasp_lost_terminal}}},
      {"jitter",
       {{"gripper_angle_deg", c.jitter.gripper_angle_deg},
        {"gripper_insertion_mm", c.jitter.gripper_insertion_mm},
        {"cauter_angle_deg", c.jitter.cauter_angle_deg},
        {"cauter_insertion_mm", c.jitter.cauter_insertion_mm}}},
      {"n_rays", c.n_rays},
      {"dt_s", c.dt_s},
      {"substeps", c.substeps},
      {"settle_steps", c.settle_steps},
      {"physics",
       {{"gravity_mm_s2",
         {c.physics.gravity_mm_s2.x(), c.physics.gravity_mm_s2.y(), c.physics.gravity_mm_s2.z()}},
        {"damping_per_substep", c.physics.damping_per_substep},
        {"constraint_iterations", c.physics.constraint_iterations},
        {"edge_stiffness", c.physics.edge_stiffness},
        {"volume_stiffness", c.physics.volume_stiffness}}},
      {"grasp_break_threshold_mm", c.grasp_break_threshold_mm},
      {"tissue_extensibility", c.tissue_extensibility},
      {"instrument_radius_mm", c.instrument_radius_mm},
      {"tissue_offset_mm", c.tissue_offset_mm},
      {"limits",
       {{"pan_deg", interval_json(c.limits.pan)},
        {"tilt_deg", interval_json(c.limits.tilt)},
        {"spin_deg", interval_json(c.limits.spin)},
        {"insertion_mm", interval_json(c.limits.insertion)}}},
      {"continuous_scale", c.continuous_scale},
      {"scene_path", c.scene_path},
  };
}

EnvConfig env_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("env config: expected an object");
  reject_unknown_keys(j, to_json(EnvConfig{}), "env config");
  EnvConfig c;
  try {
    const int version = j.value("schema_version", kEnvConfigSchemaVersion);
    if (version != kEnvConfigSchemaVersion) {
      throw ConfigError("env config: unsupported schema_version " + std::to_string(version));
    }
    // every key is optional; missing keys keep their defaults
    c.seed = j.value("seed", c.seed);
    if (j.contains("obs_mode")) c.obs_mode = obs_mode_from_string(j.at("obs_mode"));
    if (j.contains("image_size")) {
      c.image_width = j.at("image_size").at(0).get<int>();
      c.image_height = j.at("image_size").at(1).get<int>();
    }
    c.time_limit_steps = j.value("time_limit_steps", c.time_limit_steps);
    c.success_tolerance_mm = j.value("success_tolerance_mm", c.success_tolerance_mm);
    c.visibility_success_threshold =
        j.value("visibility_success_threshold", c.visibility_success_threshold);
    if (j.contains("reward_weights")) {
      const auto& r = j.at("reward_weights");
      RewardWeights& w = c.weights;
      w.dist_per_mm = r.value("dist_per_mm", w.dist_per_mm);
      w.visibility = r.value("visibility", w.visibility);
      w.obstruct_per_triangle = r.value("obstruct_per_triangle", w.obstruct_per_triangle);
      w.lost_per_contact = r.value("lost_per_contact", w.lost_per_contact);
      w.insert_per_mm = r.value("insert_per_mm", w.insert_per_mm);
      w.col_gripper_liver = r.value("col_gripper_liver", w.col_gripper_liver);
      w.col_cauter_liver = r.value("col_cauter_liver", w.col_cauter_liver);
      w.col_cauter_gallbladder = r.value("col_cauter_gallbladder", w.col_cauter_gallbladder);
      w.col_instruments = r.value("col_instruments", w.col_instruments);
      w.success = r.value("success", w.success);
      w.grasp_lost_terminal = r.value("grasp_lost_terminal", w.grasp_lost_terminal);
    }
    if (j.contains("jitter")) {
      const auto& r = j.at("jitter");
      JitterConfig& jt = c.jitter;
      jt.gripper_angle_deg = r.value("gripper_angle_deg", jt.gripper_angle_deg);
      jt.gripper_insertion_mm = r.value("gripper_insertion_mm", jt.gripper_insertion_mm);
      jt.cauter_angle_deg = r.value("cauter_angle_deg", jt.cauter_angle_deg);
      jt.cauter_insertion_mm = r.value("cauter_insertion_mm", jt.cauter_insertion_mm);
    }
    c.n_rays = j.value("n_rays", c.n_rays);
    c.dt_s = j.value("dt_s", c.dt_s);
    c.substeps = j.value("substeps", c.substeps);
    c.settle_steps = j.value("settle_steps", c.settle_steps);
    if (j.contains("physics")) {
      const auto& p = j.at("physics");
      if (p.contains("gravity_mm_s2")) {
        const auto& g = p.at("gravity_mm_s2");
        c.physics.gravity_mm_s2 = {g.at(0).get<double>(), g.at(1).get<double>(),
                                   g.at(2).get<double>()};
      }
      c.physics.damping_per_substep = p.value("damping_per_substep", c.physics.damping_per_substep);
      c.physics.constraint_iterations =
          p.value("constraint_iterations", c.physics.constraint_iterations);
      c.physics.edge_stiffness = p.value("edge_stiffness", c.physics.edge_stiffness);
      c.physics.volume_stiffness = p.value("volume_stiffness", c.physics.volume_stiffness);
    }
    c.grasp_break_threshold_mm = j.value("grasp_break_threshold_mm", c.grasp_break_threshold_mm);
    c.tissue_extensibility = j.value("tissue_extensibility", c.tissue_extensibility);
    c.instrument_radius_mm = j.value("instrument_radius_mm", c.instrument_radius_mm);
    c.tissue_offset_mm = j.value("tissue_offset_mm", c.tissue_offset_mm);
    if (j.contains("limits")) {
      const auto& l = j.at("limits");
      if (l.contains("pan_deg")) c.limits.pan = json_interval(l.at("pan_deg"));
      if (l.contains("tilt_deg")) c.limits.tilt = json_interval(l.at("tilt_deg"));
      if (l.contains("spin_deg")) c.limits.spin = json_interval(l.at("spin_deg"));
      if (l.contains("insertion_mm")) c.limits.insertion = json_interval(l.at("insertion_mm"));
    }
    if (j.contains("continuous_scale")) c.continuous_scale = j.at("continuous_scale").get<kin::Axes>();
    c.scene_path = j.value("scene_path", c.scene_path);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("env config: ") + e.what());
  }
  c.validate();
  return c;
}

EnvConfig load_env_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read env config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("env config " + path.string() + ": " + e.what());
  }
  // a training/session config may nest the environment under "env"
  if (j.contains("env") && j.at("env").is_object()) return env_config_from_json(j.at("env"));
  return env_config_from_json(j);
}

void save_env_config(const EnvConfig& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write env config " + path.string());
  out << to_json(c).dump(2) << '\n';
}

std::uint64_t config_hash(const EnvConfig& c) { return fnv1a(to_json(c).dump()); }

}  // namespace cholec::env
