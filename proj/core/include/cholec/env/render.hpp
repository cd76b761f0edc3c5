#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "cholec/sim/geometry.hpp"
#include "cholec/sim/mesh.hpp"
#include "cholec/sim/occlusion.hpp"

namespace cholec::env {

class CholecEnv;

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kLiverColor{200, 45, 40};
inline constexpr Rgb kGallbladderColor{225, 200, 50};
inline constexpr Rgb kGripperColor{40, 70, 225};
inline constexpr Rgb kCauterColor{40, 185, 70};
inline constexpr Rgb kTargetColor{255, 255, 255};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  Rgb at(int x, int y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
  int count(const Rgb& color) const;
  std::vector<float> to_chw_float() const;
  void write_ppm(const std::filesystem::path& path) const;
};

struct RenderInputs {
  const sim::Camera* camera = nullptr;
  const sim::TriangleMesh* liver = nullptr;
  const std::vector<Vec3>* gallbladder_vertices = nullptr;  // null hides the gallbladder
  const std::vector<sim::Triangle>* gallbladder_triangles = nullptr;
  std::vector<std::pair<sim::Capsule, Rgb>> instruments;
  sim::TargetSphere target;
  Vec3 light_position_mm = Vec3::Zero();
  bool shadows = true;
};

// Z-buffered flat-shaded rasterization. The target is drawn unshaded so its
// pixels are exactly kTargetColor; every other surface is strictly darker.
Image render(const RenderInputs& in, int width, int height);

// Endoscope view of the environment's current state.
Image render_scene(const CholecEnv& env, int width, int height, bool show_gallbladder = true);

}  // namespace cholec::env
