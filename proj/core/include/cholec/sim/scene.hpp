#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cholec/kinematics/trocar.hpp"
#include "cholec/sim/deformable.hpp"
#include "cholec/sim/mesh.hpp"
#include "cholec/sim/occlusion.hpp"

namespace cholec::sim {

inline constexpr int kSceneFormatVersion = 1;

struct InstrumentSetup {
  kin::TrocarFrame trocar;
  kin::InstrumentPose start;  // canonical, un-jittered start pose
};

// Static description of the surgical scene. Everything the simulation needs
// to build a fresh WorldState comes from here.
struct Scene {
  TriangleMesh liver;
  TriangleMesh gallbladder;  // rest shape
  double gallbladder_mass_kg = 0.05;
  std::vector<int> fixed_vertices;    // attached to the liver, never move
  std::vector<int> attachment_patch;  // liver-facing vertices of the gallbladder bed
  std::vector<int> grasp_vertices;    // neck vertices held by the gripper
  std::vector<Vec3> targets;
  double target_radius_mm = 2.5;
  Camera camera;
  InstrumentSetup gripper;
  InstrumentSetup cauter;

  // Throws ConfigError on inconsistent indices or geometry.
  void validate() const;
};

// Procedural default scene: ~200-vertex ellipsoidal gallbladder lying in the
// fossa of a rigid liver height-field, three targets underneath it.
Scene make_default_scene();

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);
void save_scene(const Scene& scene, const std::filesystem::path& path);
Scene load_scene(const std::filesystem::path& path);

// Tissue anchors of one grasped vertex: rest geodesic distance to every fixed vertex.
std::vector<TissueAnchor> make_anchors(const DeformableBody& body, int vertex_id);

}  // namespace cholec::sim
