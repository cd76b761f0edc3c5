#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <numbers>

namespace cholec {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kDegToRad = std::numbers::pi / 180.0;

// Rotation plus translation, millimeters.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

}  // namespace cholec
