#pragma once

#include <cstdint>
#include <vector>

#include "cholec/common/math.hpp"
#include "cholec/sim/mesh.hpp"

namespace cholec::sim {

struct EdgeConstraint {
  int i = 0;
  int j = 0;
  double rest_length_mm = 0.0;
};

// Closed surface mesh held together by edge-length and enclosed-volume constraints.
struct DeformableBody {
  std::vector<Vec3> vertices;    // mm
  std::vector<Vec3> velocities;  // mm/s
  std::vector<Triangle> triangles;
  std::vector<EdgeConstraint> edges;
  double rest_volume_mm3 = 0.0;
  std::vector<int> fixed_vertices;
  std::vector<std::uint8_t> is_fixed;
  std::vector<double> mass_kg;

  // Builds constraints from the current (rest) configuration.
  static DeformableBody from_rest_mesh(const TriangleMesh& mesh, const std::vector<int>& fixed,
                                       double total_mass_kg);

  std::size_t size() const { return vertices.size(); }
  double volume() const { return enclosed_volume(vertices, triangles); }
};

// Reach limit of a grasped vertex: it can be at most `rest_path_mm` (scaled by the
// tissue extensibility) away from the fixed vertex `fixed_vertex`.
struct TissueAnchor {
  int fixed_vertex = 0;
  double rest_path_mm = 0.0;
};

struct GraspBinding {
  int vertex_id = 0;
  Vec3 local_offset_mm = Vec3::Zero();  // in the gripper tip frame
  double elongation_mm = 0.0;
  bool broken = false;
  std::vector<TissueAnchor> anchors;

  Vec3 pinned_target(const RigidTransform& gripper_tip) const {
    return gripper_tip.apply(local_offset_mm);
  }
};

struct PhysicsParams {
  Vec3 gravity_mm_s2{0.0, -9810.0, 0.0};
  double damping_per_substep = 0.98;
  int constraint_iterations = 2;
  double edge_stiffness = 1.0;
  double volume_stiffness = 1.0;
};

// One position-based-dynamics step of length dt split in `substeps`.
// Throws SimulationDiverged on non-finite vertices.
void step_physics_inplace(DeformableBody& body, const std::vector<GraspBinding>& grasp,
                          const RigidTransform& gripper_tip, double dt, int substeps,
                          const PhysicsParams& params);

DeformableBody step_physics(DeformableBody body, const std::vector<GraspBinding>& grasp,
                            const RigidTransform& gripper_tip, double dt, int substeps,
                            const PhysicsParams& params);

// Elongation of a binding is how far its pinned target lies outside the region
// the tissue can reach from its fixed attachment without stretching.
double binding_elongation(const GraspBinding& binding, const DeformableBody& body,
                          const RigidTransform& gripper_tip, double extensibility);

// Recomputes elongations and breaks bindings above the threshold. Broken stays broken.
std::vector<GraspBinding> update_grasp(std::vector<GraspBinding> grasp, const DeformableBody& body,
                                       const RigidTransform& gripper_tip, double break_threshold_mm,
                                       double extensibility);

// Shortest rest-length paths along mesh edges from `source` to every vertex.
std::vector<double> geodesic_distances(const DeformableBody& body, int source);

int count_unbroken(const std::vector<GraspBinding>& grasp);

}  // namespace cholec::sim
