#include "gearpose/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gearpose {
namespace {

constexpr double kNearClip = 1e-3;
constexpr double kWorldGrid = 1e-9;
constexpr double kEdgeTol = 1e-12;

double snap(double x) { return std::round(x / kWorldGrid) * kWorldGrid; }

Vec3 snap(const Vec3& v) { return Vec3(snap(v.x()), snap(v.y()), snap(v.z())); }

/// Scene triangles in world space, vertices snapped to the grid. Shared by
/// the rasterizer and the ray caster so both consume identical geometry.
std::vector<Vec3> world_vertices(const Scene& scene,
                                 const std::vector<PartSpec>& catalog,
                                 std::vector<std::array<int, 3>>& triangles) {
  std::vector<Vec3> verts;
  for (const Placement& pl : scene.placements) {
    const PartSpec& part = find_part(catalog, pl.class_id);
    const RigidTransform T = planar_to_rigid(pl.pose);
    const int base = static_cast<int>(verts.size());
    verts.reserve(verts.size() + part.mesh.vertices.size());
    for (const Vec3& v : part.mesh.vertices) verts.push_back(snap(apply(T, v)));
    for (const auto& tri : part.mesh.triangles) {
      triangles.push_back({tri[0] + base, tri[1] + base, tri[2] + base});
    }
  }
  return verts;
}

void check_camera(const RigidTransform& camera_pose) {
  if (!is_rigid(camera_pose, 1e-9)) {
    throw std::invalid_argument("render: camera pose is not rigid");
  }
  if (!(camera_pose.t.z() > 0.0)) {
    throw std::invalid_argument("render: camera must sit above the table");
  }
}

/// Depth of the table plane z = 0 seen through each pixel. For a straight
/// down camera every ray has world dz = -1, so this is exactly the camera
/// height everywhere.
DepthImage table_background(const CameraIntrinsics& k,
                            const RigidTransform& camera_pose) {
  DepthImage img = DepthImage::constant(k.width, k.height, 0.0);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 dir_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      const Vec3 dir_world = camera_pose.R * dir_cam;
      if (dir_world.z() < -1e-12) {
        const double s = -camera_pose.t.z() / dir_world.z();
        if (s > 0.0) img.data(v, u) = s;
      }
    }
  }
  return img;
}

void rasterize_triangle(DepthImage& img, const CameraIntrinsics& k,
                        const Vec3& a, const Vec3& b, const Vec3& c) {
  if (a.z() <= kNearClip || b.z() <= kNearClip || c.z() <= kNearClip) return;

  const double u0 = k.fx * a.x() / a.z() + k.cx, v0 = k.fy * a.y() / a.z() + k.cy;
  const double u1 = k.fx * b.x() / b.z() + k.cx, v1 = k.fy * b.y() / b.z() + k.cy;
  const double u2 = k.fx * c.x() / c.z() + k.cx, v2 = k.fy * c.y() / c.z() + k.cy;

  const double area = (u1 - u0) * (v2 - v0) - (v1 - v0) * (u2 - u0);
  if (std::abs(area) < 1e-14) return;  // edge-on or degenerate

  const int umin = std::max(0, static_cast<int>(std::ceil(std::min({u0, u1, u2}))));
  const int umax = std::min(k.width - 1,
                            static_cast<int>(std::floor(std::max({u0, u1, u2}))));
  const int vmin = std::max(0, static_cast<int>(std::ceil(std::min({v0, v1, v2}))));
  const int vmax = std::min(k.height - 1,
                            static_cast<int>(std::floor(std::max({v0, v1, v2}))));
  if (umin > umax || vmin > vmax) return;

  const double inv_area = 1.0 / area;
  const double iz0 = 1.0 / a.z(), iz1 = 1.0 / b.z(), iz2 = 1.0 / c.z();

  for (int u = umin; u <= umax; ++u) {
    for (int v = vmin; v <= vmax; ++v) {
      const double l0 = ((u1 - u) * (v2 - v) - (v1 - v) * (u2 - u)) * inv_area;
      const double l1 = ((u2 - u) * (v0 - v) - (v2 - v) * (u0 - u)) * inv_area;
      const double l2 = 1.0 - l0 - l1;
      if (l0 < -kEdgeTol || l1 < -kEdgeTol || l2 < -kEdgeTol) continue;
      // Perspective-correct: 1/z interpolates linearly in image space.
      const double inv_z = l0 * iz0 + l1 * iz1 + l2 * iz2;
      if (!(inv_z > 0.0)) continue;
      const double z = 1.0 / inv_z;
      double& cell = img.data(v, u);
      if (z < cell) cell = z;  // strict: ties keep the first-written triangle
    }
  }
}

}  // namespace

void validate_scene(const Scene& scene, const std::vector<PartSpec>& catalog) {
  if (!(scene.table_depth > 0.0)) {
    throw std::invalid_argument("scene: table_depth must be positive");
  }
  const int n = static_cast<int>(scene.placements.size());
  for (int i = 0; i < n; ++i) {
    const PartSpec& pi = find_part(catalog, scene.placements[static_cast<std::size_t>(i)].class_id);
    const PlanarPose& a = scene.placements[static_cast<std::size_t>(i)].pose;
    for (int j = i + 1; j < n; ++j) {
      const PartSpec& pj = find_part(catalog, scene.placements[static_cast<std::size_t>(j)].class_id);
      const PlanarPose& b = scene.placements[static_cast<std::size_t>(j)].pose;
      const double d = std::hypot(a.x - b.x, a.y - b.y);
      if (d <= pi.bounding_radius + pj.bounding_radius) {
        throw std::invalid_argument("scene: bounding circles intersect");
      }
    }
  }
}

DepthImage render(const Scene& scene, const std::vector<PartSpec>& catalog,
                  const CameraIntrinsics& k,
                  const RigidTransform& camera_pose) {
  validate_scene(scene, catalog);
  check_camera(camera_pose);

  DepthImage img = table_background(k, camera_pose);

  std::vector<std::array<int, 3>> triangles;
  const std::vector<Vec3> verts = world_vertices(scene, catalog, triangles);
  const RigidTransform world_to_cam = invert(camera_pose);

  std::vector<Vec3> cam_verts(verts.size());
  for (std::size_t i = 0; i < verts.size(); ++i) {
    cam_verts[i] = apply(world_to_cam, verts[i]);
  }
  for (const auto& tri : triangles) {
    rasterize_triangle(img, k, cam_verts[static_cast<std::size_t>(tri[0])],
                       cam_verts[static_cast<std::size_t>(tri[1])],
                       cam_verts[static_cast<std::size_t>(tri[2])]);
  }
  return img;
}

DepthImage raycast_reference(const Scene& scene,
                             const std::vector<PartSpec>& catalog,
                             const CameraIntrinsics& k,
                             const RigidTransform& camera_pose) {
  validate_scene(scene, catalog);
  check_camera(camera_pose);

  DepthImage img = table_background(k, camera_pose);

  std::vector<std::array<int, 3>> triangles;
  const std::vector<Vec3> verts = world_vertices(scene, catalog, triangles);
  const RigidTransform world_to_cam = invert(camera_pose);
  std::vector<Vec3> cam_verts(verts.size());
  for (std::size_t i = 0; i < verts.size(); ++i) {
    cam_verts[i] = apply(world_to_cam, verts[i]);
  }

  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      // Unnormalized direction with dz = 1: the ray parameter equals
      // camera-frame depth, matching the rasterizer's interpolated z.
      const Vec3 dir((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      double best = img.data(v, u);
      if (best <= 0.0) best = std::numeric_limits<double>::infinity();
      for (const auto& tri : triangles) {
        const Vec3& a = cam_verts[static_cast<std::size_t>(tri[0])];
        const Vec3 e1 = cam_verts[static_cast<std::size_t>(tri[1])] - a;
        const Vec3 e2 = cam_verts[static_cast<std::size_t>(tri[2])] - a;
        const Vec3 pvec = dir.cross(e2);
        const double det = e1.dot(pvec);
        if (std::abs(det) < 1e-18) continue;
        const double inv_det = 1.0 / det;
        const Vec3 tvec = -a;  // ray origin is the camera center
        const double bu = tvec.dot(pvec) * inv_det;
        if (bu < -kEdgeTol || bu > 1.0 + kEdgeTol) continue;
        const Vec3 qvec = tvec.cross(e1);
        const double bv = dir.dot(qvec) * inv_det;
        if (bv < -kEdgeTol || bu + bv > 1.0 + kEdgeTol) continue;
        const double t = e2.dot(qvec) * inv_det;
        if (t > kNearClip && t < best) best = t;
      }
      if (std::isfinite(best)) img.data(v, u) = best;
    }
  }
  return img;
}

}  // namespace gearpose
