#include "cholec/sim/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace cholec::sim {

bool TriangleMesh::indices_valid() const {
  const int n = static_cast<int>(vertices.size());
  return std::all_of(triangles.begin(), triangles.end(), [n](const Triangle& t) {
    return t[0] >= 0 && t[0] < n && t[1] >= 0 && t[1] < n && t[2] >= 0 && t[2] < n &&
           t[0] != t[1] && t[1] != t[2] && t[0] != t[2];
  });
}

double enclosed_volume(const std::vector<Vec3>& v, const std::vector<Triangle>& triangles) {
  double vol = 0.0;
  for (const auto& t : triangles) vol += v[t[0]].dot(v[t[1]].cross(v[t[2]]));
  return vol / 6.0;
}

std::vector<std::array<int, 2>> unique_edges(const std::vector<Triangle>& triangles) {
  std::vector<std::array<int, 2>> edges;
  edges.reserve(triangles.size() * 3);
  for (const auto& t : triangles) {
    for (int k = 0; k < 3; ++k) {
      int a = t[k];
      int b = t[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      edges.push_back({a, b});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

bool is_closed_orientable(const std::vector<Triangle>& triangles) {
  std::map<std::pair<int, int>, int> directed;
  for (const auto& t : triangles) {
    for (int k = 0; k < 3; ++k) ++directed[{t[k], t[(k + 1) % 3]}];
  }
  for (const auto& [e, count] : directed) {
    if (count != 1) return false;
    const auto it = directed.find({e.second, e.first});
    if (it == directed.end() || it->second != 1) return false;
  }
  return true;
}

TriangleMesh make_ellipsoid(const Vec3& center, const Vec3& semi_axes, int rings, int segments) {
  TriangleMesh m;
  const auto point = [&](double polar, double azimuth) {
    const Vec3 unit(-std::cos(polar), std::sin(polar) * std::cos(azimuth),
                    std::sin(polar) * std::sin(azimuth));
    return Vec3(center + unit.cwiseProduct(semi_axes));
  };
  m.vertices.push_back(point(0.0, 0.0));
  for (int r = 1; r < rings; ++r) {
    const double polar = std::numbers::pi * r / rings;
    for (int s = 0; s < segments; ++s) {
      m.vertices.push_back(point(polar, 2.0 * std::numbers::pi * s / segments));
    }
  }
  m.vertices.push_back(point(std::numbers::pi, 0.0));
  const int last = static_cast<int>(m.vertices.size()) - 1;
  const auto ring = [segments](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };

  for (int s = 0; s < segments; ++s) m.triangles.push_back({0, ring(1, s + 1), ring(1, s)});
  for (int r = 1; r < rings - 1; ++r) {
    for (int s = 0; s < segments; ++s) {
      m.triangles.push_back({ring(r, s), ring(r, s + 1), ring(r + 1, s + 1)});
      m.triangles.push_back({ring(r, s), ring(r + 1, s + 1), ring(r + 1, s)});
    }
  }
  for (int s = 0; s < segments; ++s) {
    m.triangles.push_back({last, ring(rings - 1, s), ring(rings - 1, s + 1)});
  }
  // flip if the parametrization came out inward
  if (enclosed_volume(m.vertices, m.triangles) < 0.0) {
    for (auto& t : m.triangles) std::swap(t[1], t[2]);
  }
  return m;
}

}  // namespace cholec::sim
