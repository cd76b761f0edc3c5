#pragma once

#include <array>
#include <vector>

#include "cholec/common/math.hpp"

namespace cholec::sim {

using Triangle = std::array<int, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;  // counter-clockwise seen from outside

  bool indices_valid() const;
};

// Signed volume enclosed by a closed, outward-oriented surface (mm^3).
double enclosed_volume(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles);

// Unique undirected edges (i < j), sorted.
std::vector<std::array<int, 2>> unique_edges(const std::vector<Triangle>& triangles);

// True if every edge is shared by exactly two triangles with opposite winding.
bool is_closed_orientable(const std::vector<Triangle>& triangles);

// Latitude-longitude ellipsoid with poles on the x axis. Vertex 0 is the -x pole,
// the last vertex the +x pole; `rings` latitude bands, `segments` meridians.
TriangleMesh make_ellipsoid(const Vec3& center, const Vec3& semi_axes, int rings, int segments);

// Height-field surface z = height(x, y) over a rectangle, normals towards +z.
template <typename HeightFn>
TriangleMesh make_heightfield(double x0, double x1, double y0, double y1, int nx, int ny,
                              HeightFn height) {
  TriangleMesh m;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      const double x = x0 + (x1 - x0) * i / nx;
      const double y = y0 + (y1 - y0) * j / ny;
      m.vertices.emplace_back(x, y, height(x, y));
    }
  }
  const auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      m.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return m;
}

}  // namespace cholec::sim
