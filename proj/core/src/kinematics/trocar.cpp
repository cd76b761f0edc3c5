#include "cholec/kinematics/trocar.hpp"

#include <cmath>
#include <string>

#include "cholec/common/errors.hpp"

namespace cholec::kin {

bool DofLimits::valid() const {
  return pan.lower <= pan.upper && tilt.lower <= tilt.upper && spin.lower <= spin.upper &&
         insertion.lower <= insertion.upper && insertion.lower >= 0.0;
}

bool DofLimits::contains(const InstrumentPose& p) const {
  return pan.contains(p.pan_deg) && tilt.contains(p.tilt_deg) && spin.contains(p.spin_deg) &&
         insertion.contains(p.insertion_mm);
}

InstrumentPose DofLimits::clamp(const InstrumentPose& p) const {
  return {pan.clamp(p.pan_deg), tilt.clamp(p.tilt_deg), spin.clamp(p.spin_deg),
          insertion.clamp(p.insertion_mm)};
}

TrocarFrame TrocarFrame::looking_at(const Vec3& pivot, const Vec3& aim, const Vec3& up_hint) {
  const Vec3 z = (aim - pivot).normalized();
  Vec3 x = up_hint.cross(z);
  if (x.norm() < 1e-12) x = Vec3::UnitX().cross(z);
  x.normalize();
  const Vec3 y = z.cross(x);
  TrocarFrame f;
  f.pivot_mm = pivot;
  f.rest_orientation.col(0) = x;
  f.rest_orientation.col(1) = y;
  f.rest_orientation.col(2) = z;
  return f;
}

bool TrocarFrame::orthonormal(double tol) const {
  const Mat3 g = rest_orientation.transpose() * rest_orientation;
  return (g - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol;
}

Mat3 instrument_rotation(const TrocarFrame& frame, const InstrumentPose& pose) {
  const Eigen::AngleAxisd pan(pose.pan_deg * kDegToRad, Vec3::UnitY());
  const Eigen::AngleAxisd tilt(pose.tilt_deg * kDegToRad, Vec3::UnitX());
  const Eigen::AngleAxisd spin(pose.spin_deg * kDegToRad, Vec3::UnitZ());
  return frame.rest_orientation * (pan * tilt * spin).toRotationMatrix();
}

RigidTransform tip_transform(const TrocarFrame& frame, const InstrumentPose& pose) {
  RigidTransform t;
  t.rotation = instrument_rotation(frame, pose);
  t.translation = frame.pivot_mm + t.rotation.col(2) * pose.insertion_mm;
  return t;
}

InstrumentPose apply_discrete(const InstrumentPose& pose, int action_id, const DofLimits& limits) {
  if (action_id < 0 || action_id >= kNumActions) {
    throw InvalidActionError("action id " + std::to_string(action_id) + " outside 0..8");
  }
  InstrumentPose next = pose;
  const double sign = (action_id % 2 == 0) ? -1.0 : 1.0;
  switch (static_cast<Action>(action_id)) {
    case Action::kPanMinus:
    case Action::kPanPlus:
      next.pan_deg = limits.pan.clamp(pose.pan_deg + sign);
      break;
    case Action::kTiltMinus:
    case Action::kTiltPlus:
      next.tilt_deg = limits.tilt.clamp(pose.tilt_deg + sign);
      break;
    case Action::kSpinMinus:
    case Action::kSpinPlus:
      next.spin_deg = limits.spin.clamp(pose.spin_deg + sign);
      break;
    case Action::kInsertMinus:
    case Action::kInsertPlus:
      next.insertion_mm = limits.insertion.clamp(pose.insertion_mm + sign);
      break;
    case Action::kNoOp:
      break;
  }
  return next;
}

InstrumentPose apply_continuous(const InstrumentPose& pose, const Axes& axes, const Axes& scale,
                                const DofLimits& limits, std::uint64_t* clamped_axes) {
  Axes a = axes;
  for (double& v : a) {
    if (!(v >= -1.0 && v <= 1.0)) {
      if (clamped_axes) ++*clamped_axes;
      v = std::isnan(v) ? 0.0 : (v < -1.0 ? -1.0 : 1.0);
    }
  }
  InstrumentPose next;
  next.pan_deg = limits.pan.clamp(pose.pan_deg + a[0] * scale[0]);
  next.tilt_deg = limits.tilt.clamp(pose.tilt_deg + a[1] * scale[1]);
  next.spin_deg = limits.spin.clamp(pose.spin_deg + a[2] * scale[2]);
  next.insertion_mm = limits.insertion.clamp(pose.insertion_mm + a[3] * scale[3]);
  return next;
}

double max_step_displacement(double max_insertion_mm) {
  // chord of a 1 degree rotation at full insertion, or a 1 mm insertion step
  const double chord = 2.0 * max_insertion_mm * std::sin(0.5 * kDegToRad);
  return chord > 1.0 ? chord : 1.0;
}

}  // namespace cholec::kin
