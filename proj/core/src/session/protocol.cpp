#include "cholec/session/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "cholec/common/errors.hpp"
#include "cholec/common/hash.hpp"

namespace cholec::session {

namespace {

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

nlohmann::json instrument_json(const InstrumentFrame& f) {
  return {{"pose",
           {{"pan_deg", f.pose.pan_deg},
            {"tilt_deg", f.pose.tilt_deg},
            {"spin_deg", f.pose.spin_deg},
            {"insertion_mm", f.pose.insertion_mm}}},
          {"tip_mm", vec_json(f.tip_mm)}};
}

}  // namespace

InputMessage parse_input(const nlohmann::json& j) {
  try {
    if (j.at("type").get<std::string>() != "input") throw ContractError("expected an input message");
    const int version = j.at("schema_version").get<int>();
    if (version != kSchemaVersion) {
      throw ContractError("schema_version " + std::to_string(version) + " is not supported (server speaks " +
                          std::to_string(kSchemaVersion) + ")");
    }
    InputMessage m;
    m.client_id = j.value("client_id", "");
    m.instrument = env::instrument_from_string(j.value("instrument", "gripper"));
    if (j.contains("axes")) {
      const auto& a = j.at("axes");
      if (!a.is_array() || a.size() != 4) throw ContractError("axes must be a 4-vector");
      for (int k = 0; k < 4; ++k) {
        const double v = a[k].get<double>();
        if (!std::isfinite(v)) throw ContractError("axes must be finite");
        m.axes[k] = std::clamp(v, -1.0, 1.0);
        if (m.axes[k] != v) ++m.clamped_axes;
      }
    }
    if (j.contains("buttons")) {
      const auto& b = j.at("buttons");
      m.switch_instrument = b.value("switch_instrument", false);
      m.reset_episode = b.value("reset_episode", false);
    }
    m.client_timestamp = j.value("client_timestamp", 0.0);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("malformed input message: ") + e.what());
  }
}

nlohmann::json to_json(const InputMessage& m) {
  return {{"type", "input"},
          {"schema_version", kSchemaVersion},
          {"client_id", m.client_id},
          {"instrument", env::to_string(m.instrument)},
          {"axes", {m.axes[0], m.axes[1], m.axes[2], m.axes[3]}},
          {"buttons", {{"switch_instrument", m.switch_instrument}, {"reset_episode", m.reset_episode}}},
          {"client_timestamp", m.client_timestamp}};
}

std::vector<Vec3> decimate(const std::vector<Vec3>& vertices, int max_points) {
  const std::size_t n = vertices.size();
  const std::size_t k = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(max_points, 0)));
  std::vector<Vec3> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(vertices[i * n / k]);
  return out;
}

nlohmann::json to_json(const StateFrame& f) {
  nlohmann::json verts = nlohmann::json::array();
  for (const auto& v : f.gallbladder) verts.push_back(vec_json(v));
  return {{"type", "state"},
          {"schema_version", kSchemaVersion},
          {"tick", f.tick},
          {"episode", f.episode},
          {"step", f.step},
          {"episode_seed", f.episode_seed},
          {"gripper", instrument_json(f.gripper)},
          {"cauter", instrument_json(f.cauter)},
          {"gallbladder", verts},
          {"target",
           {{"center_mm", vec_json(f.target_mm)},
            {"radius_mm", f.target_radius_mm},
            {"visible_fraction", f.visible_fraction}}},
          {"reward", {{"gripper", f.reward_gripper}, {"cauter", f.reward_cauter}}},
          {"cumulative_reward", {{"gripper", f.cumulative_gripper}, {"cauter", f.cumulative_cauter}}},
          {"grasp_count", f.grasp_count},
          {"collisions",
           {{"gripper_liver", f.collisions.gripper_liver.collided},
            {"cauter_liver", f.collisions.cauter_liver.collided},
            {"cauter_gallbladder", f.collisions.cauter_gallbladder.collided},
            {"instrument_instrument", f.collisions.instrument_instrument.collided}}},
          {"outcome", f.outcome ? nlohmann::json(env::to_string(*f.outcome)) : nlohmann::json()},
          {"paused", f.paused},
          {"active_instrument",
           f.active_instrument ? nlohmann::json(env::to_string(*f.active_instrument)) : nlohmann::json()},
          {"digest", to_hex(f.digest)}};
}

StateFrame make_state_frame(const env::CholecEnv& env) {
  const auto& s = env.state();
  StateFrame f;
  f.step = s.step;
  f.episode_seed = s.episode_seed;
  f.gripper = {s.gripper_pose, env.gripper_tip().translation};
  f.cauter = {s.cauter_pose, env.cauter_tip().translation};
  f.gallbladder = decimate(s.gallbladder.vertices);
  f.target_mm = s.target.center_mm;
  f.target_radius_mm = s.target.radius_mm;
  f.visible_fraction = s.occlusion.visible_fraction;
  f.grasp_count = sim::count_unbroken(s.grasp);
  f.collisions = s.collisions;
  f.outcome = s.outcome;
  f.digest = env::state_digest(s);
  return f;
}

nlohmann::json episode_summary_json(int episode, const eval::EpisodeMetrics& m) {
  return {{"type", "episode_summary"},
          {"schema_version", kSchemaVersion},
          {"episode", episode},
          {"episode_seed", m.episode_seed},
          {"outcome", env::to_string(m.outcome)},
          {"success", m.success},
          {"steps", m.steps},
          {"time_s", m.time_s},
          {"pl_gripper_mm", m.pl_gripper_mm},
          {"pl_cauter_mm", m.pl_cauter_mm},
          {"col_gl", m.col_gl},
          {"col_cl", m.col_cl},
          {"col_cg", m.col_cg},
          {"col_ii", m.col_ii},
          {"return_gripper", m.return_gripper},
          {"return_cauter", m.return_cauter},
          {"final_digest", to_hex(m.final_digest)}};
}

nlohmann::json warning_json(const std::string& message) {
  return {{"type", "warning"}, {"schema_version", kSchemaVersion}, {"message", message}};
}

nlohmann::json error_json(const std::string& message) {
  return {{"type", "error"}, {"schema_version", kSchemaVersion}, {"message", message}};
}

}  // namespace cholec::session
