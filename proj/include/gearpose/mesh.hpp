#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gearpose/geometry.hpp"

namespace gearpose {

/// Triangle mesh in meters. Triangle soup is allowed (surfaces may touch or
/// interpenetrate); indices refer into `vertices`.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  bool empty() const { return triangles.empty(); }
};

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

/// Rejects out-of-range indices, non-finite vertices and degenerate
/// triangles (area below 1e-12 m^2).
inline void validate_mesh(const Mesh& m) {
  const int n = static_cast<int>(m.vertices.size());
  for (const Vec3& v : m.vertices) {
    if (!v.allFinite()) throw std::invalid_argument("mesh: non-finite vertex");
  }
  for (const auto& tri : m.triangles) {
    for (int idx : tri) {
      if (idx < 0 || idx >= n) {
        throw std::invalid_argument("mesh: triangle index out of range");
      }
    }
    if (triangle_area(m.vertices[static_cast<std::size_t>(tri[0])],
                      m.vertices[static_cast<std::size_t>(tri[1])],
                      m.vertices[static_cast<std::size_t>(tri[2])]) < 1e-12) {
      throw std::invalid_argument("mesh: degenerate triangle");
    }
  }
}

inline Mesh transformed(const Mesh& m, const RigidTransform& T) {
  Mesh out = m;
  for (Vec3& v : out.vertices) v = apply(T, v);
  return out;
}

inline void append_mesh(Mesh& dst, const Mesh& src) {
  const int base = static_cast<int>(dst.vertices.size());
  dst.vertices.insert(dst.vertices.end(), src.vertices.begin(),
                      src.vertices.end());
  dst.triangles.reserve(dst.triangles.size() + src.triangles.size());
  for (const auto& tri : src.triangles) {
    dst.triangles.push_back({tri[0] + base, tri[1] + base, tri[2] + base});
  }
}

/// Symmetric Hausdorff distance between the vertex sets of two meshes.
/// Quadratic scan; intended for tests and catalog checks, not hot paths.
inline double hausdorff_vertex_distance(const Mesh& a, const Mesh& b) {
  if (a.vertices.empty() || b.vertices.empty()) {
    throw std::invalid_argument("hausdorff_vertex_distance: empty mesh");
  }
  auto one_sided = [](const std::vector<Vec3>& from,
                      const std::vector<Vec3>& to) {
    double worst = 0.0;
    for (const Vec3& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& q : to) best = std::min(best, (p - q).norm());
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_sided(a.vertices, b.vertices),
                  one_sided(b.vertices, a.vertices));
}

}  // namespace gearpose
