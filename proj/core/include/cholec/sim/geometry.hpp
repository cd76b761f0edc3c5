#pragma once

#include <limits>
#include <optional>

#include "cholec/common/math.hpp"

namespace cholec::sim {

struct Capsule {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 0.0;
};

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void grow(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Aabb inflated(double r) const { return {lo.array() - r, hi.array() + r}; }
  bool overlaps(const Aabb& o) const {
    return (lo.array() <= o.hi.array()).all() && (o.lo.array() <= hi.array()).all();
  }
};

Aabb bounds(const Capsule& c);

// Closest point on triangle (a, b, c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

double segment_segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1);

// Zero when the segment pierces the triangle.
double segment_triangle_distance(const Vec3& p0, const Vec3& p1, const Vec3& a, const Vec3& b,
                                 const Vec3& c);

// Ray parameter of the hit for origin + t * dir, t in (t_min, t_max).
std::optional<double> ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a,
                                   const Vec3& b, const Vec3& c, double t_min, double t_max);

// Smallest t >= 0 where origin + t * dir enters the sphere.
std::optional<double> ray_sphere(const Vec3& origin, const Vec3& dir, const Vec3& center,
                                 double radius);

// Distance from p to the segment's axis-capsule surface core (the segment itself).
double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b);

}  // namespace cholec::sim
