#include "cholec/env/state_io.hpp"

#include "cholec/common/errors.hpp"

namespace cholec::env {

namespace {

void write_pose(BinaryWriter& out, const kin::InstrumentPose& p) {
  out.pod(p.pan_deg);
  out.pod(p.tilt_deg);
  out.pod(p.spin_deg);
  out.pod(p.insertion_mm);
}

kin::InstrumentPose read_pose(BinaryReader& in) {
  kin::InstrumentPose p;
  p.pan_deg = in.pod<double>();
  p.tilt_deg = in.pod<double>();
  p.spin_deg = in.pod<double>();
  p.insertion_mm = in.pod<double>();
  return p;
}

void write_vec3s(BinaryWriter& out, const std::vector<Vec3>& v) {
  out.pod<std::uint64_t>(v.size());
  for (const auto& x : v) {
    out.pod(x.x());
    out.pod(x.y());
    out.pod(x.z());
  }
}

void read_vec3s(BinaryReader& in, std::vector<Vec3>& v) {
  if (in.pod<std::uint64_t>() != v.size()) throw IoError("state: vertex count does not match scene");
  for (auto& x : v) {
    x.x() = in.pod<double>();
    x.y() = in.pod<double>();
    x.z() = in.pod<double>();
  }
}

}  // namespace

void write_state(BinaryWriter& out, const WorldState& s) {
  write_vec3s(out, s.gallbladder.vertices);
  write_vec3s(out, s.gallbladder.velocities);
  out.pod<std::uint64_t>(s.grasp.size());
  for (const auto& g : s.grasp) {
    out.pod<std::int32_t>(g.vertex_id);
    out.pod(g.local_offset_mm.x());
    out.pod(g.local_offset_mm.y());
    out.pod(g.local_offset_mm.z());
    out.pod(g.elongation_mm);
    out.pod<std::uint8_t>(g.broken ? 1 : 0);
  }
  write_pose(out, s.gripper_pose);
  write_pose(out, s.cauter_pose);
  out.pod<std::int32_t>(s.target_index);
  out.pod<std::int32_t>(s.step);
  out.pod<std::uint8_t>(s.done ? 1 : 0);
  out.pod<std::int32_t>(s.outcome ? static_cast<int>(*s.outcome) : -1);
  out.pod(s.episode_seed);
  out.pod<std::int32_t>(s.lost_this_step);
  out.pod(s.clamped_axes);
}

WorldState read_state(BinaryReader& in, const EnvAssets& assets) {
  const auto& scene = assets.scene;
  WorldState s;
  s.gallbladder = assets.gallbladder_template;
  read_vec3s(in, s.gallbladder.vertices);
  read_vec3s(in, s.gallbladder.velocities);
  const auto n_grasp = in.pod<std::uint64_t>();
  if (n_grasp != scene.grasp_vertices.size()) throw IoError("state: grasp count does not match scene");
  for (std::size_t k = 0; k < n_grasp; ++k) {
    sim::GraspBinding g;
    g.vertex_id = in.pod<std::int32_t>();
    if (g.vertex_id != scene.grasp_vertices[k]) throw IoError("state: grasp vertex does not match scene");
    g.local_offset_mm.x() = in.pod<double>();
    g.local_offset_mm.y() = in.pod<double>();
    g.local_offset_mm.z() = in.pod<double>();
    g.elongation_mm = in.pod<double>();
    g.broken = in.pod<std::uint8_t>() != 0;
    g.anchors = assets.grasp_anchors[k];
    s.grasp.push_back(std::move(g));
  }
  s.gripper_pose = read_pose(in);
  s.cauter_pose = read_pose(in);
  s.target_index = in.pod<std::int32_t>();
  if (s.target_index < 0 || s.target_index >= static_cast<int>(scene.targets.size())) {
    throw IoError("state: target index out of range");
  }
  s.target = {scene.targets[s.target_index], scene.target_radius_mm};
  s.step = in.pod<std::int32_t>();
  s.done = in.pod<std::uint8_t>() != 0;
  const int outcome = in.pod<std::int32_t>();
  if (outcome < -1 || outcome > 2) throw IoError("state: invalid outcome");
  if (outcome >= 0) s.outcome = static_cast<Outcome>(outcome);
  s.episode_seed = in.pod<std::uint64_t>();
  s.lost_this_step = in.pod<std::int32_t>();
  s.clamped_axes = in.pod<std::uint64_t>();
  return s;
}

}  // namespace cholec::env
