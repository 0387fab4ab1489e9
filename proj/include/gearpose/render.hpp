#pragma once

#include <vector>

#include "gearpose/catalog.hpp"
#include "gearpose/geometry.hpp"
#include "gearpose/image.hpp"

namespace gearpose {

/// One part on the table.
struct Placement {
  PartClass class_id = PartClass::BasePlate;
  PlanarPose pose;
};

/// Parts on the table plane z = 0. table_depth is the nominal camera-to-table
/// distance scenes of this kind are imaged from.
struct Scene {
  std::vector<Placement> placements;
  double table_depth = 0.0;
};

/// Rejects non-positive table depth, unknown classes, and placements whose
/// bounding circles intersect.
void validate_scene(const Scene& scene, const std::vector<PartSpec>& catalog);

/// Renders camera-frame depth (z, not ray length) of the scene through a
/// pinhole camera. camera_pose is camera-to-world and must look down at the
/// table from above. Pixels ray-hitting only the table read the plane depth;
/// geometry below the table plane never wins the depth test. Pixel centers
/// sample at integer coordinates; z-buffer ties keep the first-written
/// triangle. World-space vertices are snapped to a 1 nm grid, which makes
/// renders of exactly symmetric parts bit-identical under symmetry rotations.
DepthImage render(const Scene& scene, const std::vector<PartSpec>& catalog,
                  const CameraIntrinsics& k, const RigidTransform& camera_pose);

/// Same image computed by per-pixel ray casting (Moller-Trumbore) over every
/// triangle. Slow; serves as the rasterizer's independent cross-check.
DepthImage raycast_reference(const Scene& scene,
                             const std::vector<PartSpec>& catalog,
                             const CameraIntrinsics& k,
                             const RigidTransform& camera_pose);

}  // namespace gearpose
