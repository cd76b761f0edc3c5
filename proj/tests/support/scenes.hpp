#pragma once

#include "cholec/sim/scene.hpp"

namespace cholec::test {

// Frame with the shaft along world -z, the pan axis along -y and the tilt axis along +x.
// Every entry is 0 or +-1, so tip positions at zero angles are exact.
inline kin::TrocarFrame vertical_trocar(const Vec3& pivot) {
  kin::TrocarFrame f;
  f.pivot_mm = pivot;
  f.rest_orientation << 1, 0, 0,
                        0, -1, 0,
                        0, 0, -1;
  return f;
}

// Default scene with the cauter hanging straight down from an integer pivot, well away from the
// tissue, so unit insertion steps move its tip by exactly 1 mm.
inline sim::Scene straight_cauter_scene() {
  sim::Scene s = sim::make_default_scene();
  s.cauter.trocar = vertical_trocar(Vec3(50.0, 60.0, 200.0));
  s.cauter.start = kin::InstrumentPose{0.0, 0.0, 0.0, 40.0};
  return s;
}

// Default scene where every reported pair interpenetrates at the start pose: the gripper shaft
// pierces the liver, the cauter shaft runs through the gallbladder into the liver, and the two
// shafts cross at (0, -20, 40).
inline sim::Scene interpenetration_scene() {
  sim::Scene s = sim::make_default_scene();
  s.gripper.trocar = vertical_trocar(Vec3(0.0, -20.0, 100.0));
  s.gripper.start = kin::InstrumentPose{0.0, 0.0, 0.0, 130.0};
  const Vec3 pivot(0.0, -60.0, 100.0);
  const Vec3 aim(0.0, 20.0, -20.0);
  s.cauter.trocar = kin::TrocarFrame::looking_at(pivot, aim, Vec3(0.0, 0.0, 1.0));
  s.cauter.start = kin::InstrumentPose{0.0, 0.0, 0.0, (aim - pivot).norm()};
  return s;
}

}  // namespace cholec::test
