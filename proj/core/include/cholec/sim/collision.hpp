#pragma once

#include "cholec/sim/geometry.hpp"
#include "cholec/sim/mesh.hpp"

namespace cholec::sim {

struct PairContact {
  bool collided = false;
  int contacts = 0;  // triangles (or 1 for capsule pairs) within the contact distance

  bool operator==(const PairContact&) const = default;
};

// Contact flags for exactly one simulation step. Gripper-gallbladder is not a
// reported pair: the gripper holds the gallbladder by design.
struct CollisionReport {
  PairContact gripper_liver;
  PairContact cauter_liver;
  PairContact cauter_gallbladder;
  PairContact instrument_instrument;

  bool any() const {
    return gripper_liver.collided || cauter_liver.collided || cauter_gallbladder.collided ||
           instrument_instrument.collided;
  }
  bool operator==(const CollisionReport&) const = default;
};

struct CollisionParams {
  double tissue_offset_mm = 0.5;
};

// Precomputed per-triangle bounds of a static mesh.
struct StaticMeshIndex {
  const TriangleMesh* mesh = nullptr;
  std::vector<Aabb> triangle_bounds;
  Aabb bounds;

  explicit StaticMeshIndex(const TriangleMesh& m);
};

// Capsule against triangles: contact when the minimum distance is strictly
// smaller than radius + offset.
PairContact capsule_mesh_contact(const Capsule& capsule, const std::vector<Vec3>& vertices,
                                 const std::vector<Triangle>& triangles, double offset_mm);
PairContact capsule_mesh_contact(const Capsule& capsule, const StaticMeshIndex& index,
                                 double offset_mm);
PairContact capsule_capsule_contact(const Capsule& a, const Capsule& b);

CollisionReport detect_collisions(const std::vector<Vec3>& gallbladder_vertices,
                                  const std::vector<Triangle>& gallbladder_triangles,
                                  const StaticMeshIndex& liver, const Capsule& gripper_shaft,
                                  const Capsule& cauter_shaft, const CollisionParams& params);

}  // namespace cholec::sim
