#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gearpose/geometry.hpp"
#include "gearpose/mesh.hpp"

namespace gearpose {

enum class PartClass {
  BasePlate = 0,
  Shaft1,
  Shaft2,
  CompoundGear,
  Gear1,
  Gear2,
};

constexpr int kPartClassCount = 6;

std::string_view to_string(PartClass c);
PartClass part_class_from_string(std::string_view name);

/// Peg-into-hole clearance pair for the insertion simulation.
struct Insertion {
  double hole_radius = 0.0;
  double peg_radius = 0.0;
};

/// One catalog entry. symmetry_order is the true rotational symmetry of the
/// mesh about +z; subclass_count is the number of near-identical branches a
/// distal view cannot separate. angular_domain_deg = 360 / (order * branches)
/// is the range a coarse angle estimate lives in.
struct PartSpec {
  PartClass class_id = PartClass::BasePlate;
  int symmetry_order = 1;
  int subclass_count = 1;
  double angular_domain_deg = 360.0;
  double bounding_radius = 0.0;
  double asymmetry_scale = 0.0;
  Mesh mesh;
  RigidTransform grasp_in_part;
  RigidTransform target_in_plate;
  std::optional<Insertion> insertion;
};

inline int effective_stage1_order(const PartSpec& p) {
  return p.symmetry_order * p.subclass_count;
}

/// Overridable knobs for the built-in six-part catalog. Lengths in meters.
struct CatalogOptions {
  /// Height of the symmetry-breaking boss on near-symmetric parts. Zero
  /// removes the feature, making those parts exactly symmetric.
  double asymmetry_scale = 0.002;

  double gear1_tip_radius = 0.020;
  double gear1_root_radius = 0.016;
  double gear1_thickness = 0.010;
  double gear1_hole_radius = 0.005;

  double gear2_tip_radius = 0.025;
  double gear2_root_radius = 0.021;
  double gear2_thickness = 0.010;
  double gear2_hole_radius = 0.005;

  double compound_big_tip_radius = 0.045;
  double compound_big_root_radius = 0.040;
  double compound_big_thickness = 0.008;
  double compound_top_tip_radius = 0.018;
  double compound_top_root_radius = 0.0145;
  double compound_top_thickness = 0.008;
  double compound_hole_radius = 0.005;

  double shaft1_length = 0.080;
  double shaft1_mid_radius = 0.0045;
  double shaft1_end_radius = 0.0035;
  double shaft1_end_length = 0.010;

  double shaft2_length = 0.060;
  double shaft2_mid_radius = 0.0035;
  double shaft2_end_radius = 0.0025;
  double shaft2_end_length = 0.010;

  double plate_size_x = 0.150;
  double plate_size_y = 0.100;
  double plate_thickness = 0.008;

  std::optional<Insertion> insertion_override[kPartClassCount];
  std::optional<RigidTransform> grasp_override[kPartClassCount];
  std::optional<RigidTransform> target_override[kPartClassCount];
};

class ConfigFile;

/// Reads `[catalog]` overrides into options: every dimension field by name
/// (e.g. `gear1_tip_radius`), per-part insertion radii as
/// `<part>_hole_radius` / `<part>_peg_radius` (both or neither), and
/// grasp/target transforms as `<part>_grasp` / `<part>_target` with twelve
/// row-major numbers for the 3x4 rotation+translation matrix.
CatalogOptions catalog_options_from(const ConfigFile& cfg);

/// Builds the six-part catalog, ordered by PartClass value.
std::vector<PartSpec> builtin_catalog(const CatalogOptions& opts = {});

/// Procedural mesh for a single class, origin at the rotation center on the
/// table plane (z = 0 is the resting surface).
Mesh generate_mesh(PartClass c, const CatalogOptions& opts = {});

const PartSpec& find_part(const std::vector<PartSpec>& catalog, PartClass c);

/// Side length in pixels of the class-fixed detection box at the given
/// camera height: the projected bounding circle diameter at table level.
double fixed_bbox_px(const PartSpec& part, const CameraIntrinsics& k,
                     double height_m);

}  // namespace gearpose
