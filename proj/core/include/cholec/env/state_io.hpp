#pragma once

#include "cholec/common/binary_io.hpp"
#include "cholec/env/cholec_env.hpp"

namespace cholec::env {

// Dynamic part of a WorldState. Mesh topology, grasp anchors and derived quantities are not
// written; read_state takes them from the assets and CholecEnv::set_state recomputes the rest.
void write_state(BinaryWriter& out, const WorldState& s);
WorldState read_state(BinaryReader& in, const EnvAssets& assets);

}  // namespace cholec::env
