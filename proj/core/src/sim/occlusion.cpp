#include "cholec/sim/occlusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cholec/common/errors.hpp"
#include "cholec/sim/geometry.hpp"

namespace cholec::sim {

Camera Camera::looking_at(const Vec3& position, const Vec3& target, const Vec3& up,
                          double fov_y_deg) {
  Camera c;
  c.position_mm = position;
  const Vec3 f = (target - position).normalized();
  const Vec3 r = f.cross(up).normalized();
  const Vec3 u = r.cross(f);
  c.orientation.col(0) = r;
  c.orientation.col(1) = u;
  c.orientation.col(2) = f;
  c.fov_y_deg = fov_y_deg;
  return c;
}

std::vector<Vec3> hemisphere_samples(const Vec3& camera_origin, const TargetSphere& target,
                                     int n_rays) {
  const Vec3 w = (camera_origin - target.center_mm).normalized();
  const Vec3 helper = std::abs(w.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = w.cross(helper).normalized();
  const Vec3 v = w.cross(u);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> pts;
  pts.reserve(n_rays);
  for (int i = 0; i < n_rays; ++i) {
    const double rho = std::sqrt((i + 0.5) / n_rays);
    const double phi = golden * i;
    const double h = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    const Vec3 dir = u * (rho * std::cos(phi)) + v * (rho * std::sin(phi)) + w * h;
    pts.push_back(target.center_mm + target.radius_mm * dir);
  }
  return pts;
}

OcclusionResult occlusion_query(const std::vector<Vec3>& vertices,
                                const std::vector<Triangle>& triangles, const Vec3& camera_origin,
                                const TargetSphere& target, int n_rays) {
  if (n_rays < 1) throw ContractError("occlusion_query: n_rays must be >= 1");
  const auto samples = hemisphere_samples(camera_origin, target, n_rays);

  // Cone from the camera enclosing the target; triangles whose bounding sphere misses it cannot
  // block. The test is conservative.
  const Vec3 axis_vec = target.center_mm - camera_origin;
  const double axis_len = axis_vec.norm();
  const Vec3 axis = axis_vec / axis_len;
  const double sin_cone = std::min(1.0, target.radius_mm / axis_len);
  const double cos_cone = std::sqrt(std::max(1e-12, 1.0 - sin_cone * sin_cone));
  const double tan_cone = sin_cone / cos_cone;

  std::vector<int> candidates;
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& tri = triangles[t];
    const Vec3 c = (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
    double rad2 = 0.0;
    for (int k : tri) rad2 = std::max(rad2, (vertices[k] - c).squaredNorm());
    const double rad = std::sqrt(rad2);
    const Vec3 to = c - camera_origin;
    const double depth = to.dot(axis);
    if (depth + rad < 0.0 || depth - rad > axis_len + target.radius_mm) continue;
    const double perp = (to - depth * axis).norm();
    if (perp <= (std::max(depth, 0.0) + rad) * tan_cone + rad / cos_cone + 1e-9) {
      candidates.push_back(static_cast<int>(t));
    }
  }

  std::vector<std::uint8_t> hit_flag(triangles.size(), 0);
  int visible = 0;
  for (const Vec3& s : samples) {
    const Vec3 dir = s - camera_origin;
    bool blocked = false;
    for (int t : candidates) {
      const auto& tri = triangles[t];
      if (ray_triangle(camera_origin, dir, vertices[tri[0]], vertices[tri[1]], vertices[tri[2]],
                       0.0, 1.0 - 1e-9)) {
        blocked = true;
        hit_flag[t] = 1;
      }
    }
    if (!blocked) ++visible;
  }
  OcclusionResult r;
  r.visible_fraction = static_cast<double>(visible) / n_rays;
  r.obstructing_triangles = static_cast<int>(std::count(hit_flag.begin(), hit_flag.end(), 1));
  return r;
}

}  // namespace cholec::sim
