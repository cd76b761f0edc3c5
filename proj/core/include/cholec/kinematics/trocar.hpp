#pragma once

#include <array>
#include <cstdint>

#include "cholec/common/math.hpp"

namespace cholec::kin {

// Trocar-relative configuration of one instrument.
struct InstrumentPose {
  double pan_deg = 0.0;
  double tilt_deg = 0.0;
  double spin_deg = 0.0;
  double insertion_mm = 0.0;

  bool operator==(const InstrumentPose&) const = default;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  double clamp(double v) const { return v < lower ? lower : (v > upper ? upper : v); }
  bool contains(double v) const { return v >= lower && v <= upper; }
};

struct DofLimits {
  Interval pan{-60.0, 60.0};
  Interval tilt{-60.0, 60.0};
  Interval spin{-180.0, 180.0};
  Interval insertion{0.0, 250.0};

  bool valid() const;
  bool contains(const InstrumentPose& pose) const;
  InstrumentPose clamp(const InstrumentPose& pose) const;
};

// Fixed pivot at the incision. The rest orientation's third column is the
// shaft (insertion) axis, the second column the pan axis, the first the tilt axis.
struct TrocarFrame {
  Vec3 pivot_mm = Vec3::Zero();
  Mat3 rest_orientation = Mat3::Identity();

  // Frame whose shaft points from `pivot` towards `aim`; `up_hint` fixes the roll.
  static TrocarFrame looking_at(const Vec3& pivot, const Vec3& aim, const Vec3& up_hint);
  bool orthonormal(double tol = 1e-9) const;
};

// Discrete action ids. The ordering is part of the checkpoint contract.
enum class Action : std::uint8_t {
  kPanMinus = 0,
  kPanPlus = 1,
  kTiltMinus = 2,
  kTiltPlus = 3,
  kSpinMinus = 4,
  kSpinPlus = 5,
  kInsertMinus = 6,
  kInsertPlus = 7,
  kNoOp = 8,
};

inline constexpr int kNumActions = 9;
inline constexpr int kNoOpId = 8;

using Axes = std::array<double, 4>;  // pan, tilt, spin, insertion in [-1, 1]

// Per-tick displacement of a saturated continuous input, (deg, deg, deg, mm).
inline constexpr Axes kDefaultContinuousScale{1.0, 1.0, 1.0, 1.0};

// Rotation of the instrument: pan about the frame's vertical axis, then tilt
// about the rotated horizontal axis, then spin about the shaft.
Mat3 instrument_rotation(const TrocarFrame& frame, const InstrumentPose& pose);

// Instrument tip frame; tip = pivot + R (0, 0, insertion).
RigidTransform tip_transform(const TrocarFrame& frame, const InstrumentPose& pose);

// Throws InvalidActionError for ids outside 0..8.
InstrumentPose apply_discrete(const InstrumentPose& pose, int action_id, const DofLimits& limits);

// Components outside [-1, 1] are clamped and counted in `clamped_axes` when given.
InstrumentPose apply_continuous(const InstrumentPose& pose, const Axes& axes, const Axes& scale,
                                const DofLimits& limits, std::uint64_t* clamped_axes = nullptr);

// Upper bound on the tip displacement of one discrete step at insertion `max_insertion_mm`.
double max_step_displacement(double max_insertion_mm);

}  // namespace cholec::kin
