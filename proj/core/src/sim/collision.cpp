#include "cholec/sim/collision.hpp"

#include "cholec/common/errors.hpp"

namespace cholec::sim {

StaticMeshIndex::StaticMeshIndex(const TriangleMesh& m) : mesh(&m) {
  triangle_bounds.reserve(m.triangles.size());
  for (const auto& t : m.triangles) {
    Aabb box;
    for (int k : t) box.grow(m.vertices[k]);
    triangle_bounds.push_back(box);
    bounds.grow(box.lo);
    bounds.grow(box.hi);
  }
}

PairContact capsule_mesh_contact(const Capsule& capsule, const std::vector<Vec3>& vertices,
                                 const std::vector<Triangle>& triangles, double offset_mm) {
  PairContact out;
  const double reach = capsule.radius + offset_mm;
  const Aabb cap = bounds(capsule).inflated(offset_mm);
  for (const auto& t : triangles) {
    Aabb box;
    for (int k : t) box.grow(vertices[k]);
    if (!box.overlaps(cap)) continue;
    if (segment_triangle_distance(capsule.a, capsule.b, vertices[t[0]], vertices[t[1]],
                                  vertices[t[2]]) < reach) {
      ++out.contacts;
    }
  }
  out.collided = out.contacts > 0;
  return out;
}

PairContact capsule_mesh_contact(const Capsule& capsule, const StaticMeshIndex& index,
                                 double offset_mm) {
  PairContact out;
  const double reach = capsule.radius + offset_mm;
  const Aabb cap = bounds(capsule).inflated(offset_mm);
  if (!index.bounds.overlaps(cap)) return out;
  const auto& m = *index.mesh;
  for (std::size_t i = 0; i < m.triangles.size(); ++i) {
    if (!index.triangle_bounds[i].overlaps(cap)) continue;
    const auto& t = m.triangles[i];
    if (segment_triangle_distance(capsule.a, capsule.b, m.vertices[t[0]], m.vertices[t[1]],
                                  m.vertices[t[2]]) < reach) {
      ++out.contacts;
    }
  }
  out.collided = out.contacts > 0;
  return out;
}

PairContact capsule_capsule_contact(const Capsule& a, const Capsule& b) {
  PairContact out;
  if (segment_segment_distance(a.a, a.b, b.a, b.b) < a.radius + b.radius) {
    out.collided = true;
    out.contacts = 1;
  }
  return out;
}

CollisionReport detect_collisions(const std::vector<Vec3>& gallbladder_vertices,
                                  const std::vector<Triangle>& gallbladder_triangles,
                                  const StaticMeshIndex& liver, const Capsule& gripper_shaft,
                                  const Capsule& cauter_shaft, const CollisionParams& params) {
  if (!(gripper_shaft.radius > 0.0) || !(cauter_shaft.radius > 0.0)) {
    throw ContractError("detect_collisions: capsule radii must be > 0");
  }
  CollisionReport r;
  r.gripper_liver = capsule_mesh_contact(gripper_shaft, liver, params.tissue_offset_mm);
  r.cauter_liver = capsule_mesh_contact(cauter_shaft, liver, params.tissue_offset_mm);
  r.cauter_gallbladder = capsule_mesh_contact(cauter_shaft, gallbladder_vertices,
                                              gallbladder_triangles, params.tissue_offset_mm);
  r.instrument_instrument = capsule_capsule_contact(gripper_shaft, cauter_shaft);
  return r;
}

}  // namespace cholec::sim
