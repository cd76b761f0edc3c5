#pragma once

#include <vector>

#include "cholec/common/math.hpp"
#include "cholec/sim/mesh.hpp"

namespace cholec::sim {

struct TargetSphere {
  Vec3 center_mm = Vec3::Zero();
  double radius_mm = 2.5;
};

// Pinhole camera. Columns of `orientation` are image right, image up and the
// viewing direction.
struct Camera {
  Vec3 position_mm = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();
  double fov_y_deg = 60.0;

  static Camera looking_at(const Vec3& position, const Vec3& target, const Vec3& up,
                           double fov_y_deg);
  Vec3 forward() const { return orientation.col(2); }
};

struct OcclusionResult {
  double visible_fraction = 1.0;
  int obstructing_triangles = 0;
};

// Sample points on the camera-facing hemisphere of the target. Points are a
// Vogel spiral on the silhouette disk lifted onto the sphere, so each one
// stands for an equal share of the target's projected area.
std::vector<Vec3> hemisphere_samples(const Vec3& camera_origin, const TargetSphere& target,
                                     int n_rays);

// Casts rays from the camera origin to the hemisphere samples. A ray is
// obstructed when it hits any of the triangles before reaching its sample.
OcclusionResult occlusion_query(const std::vector<Vec3>& vertices,
                                const std::vector<Triangle>& triangles, const Vec3& camera_origin,
                                const TargetSphere& target, int n_rays);

}  // namespace cholec::sim
