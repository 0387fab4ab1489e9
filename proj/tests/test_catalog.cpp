#include "doctest.h"

#include <cmath>

#include "gearpose/catalog.hpp"
#include "gearpose/config.hpp"

using namespace gearpose;

TEST_CASE("catalog lists the six classes in enum order") {
  const auto catalog = builtin_catalog();
  REQUIRE(catalog.size() == 6);
  for (int i = 0; i < kPartClassCount; ++i) {
    CHECK(static_cast<int>(catalog[static_cast<std::size_t>(i)].class_id) == i);
  }
}

TEST_CASE("symmetry structure per class") {
  const auto catalog = builtin_catalog();
  auto check = [&](PartClass c, int order, int subclasses, double domain) {
    const PartSpec& p = find_part(catalog, c);
    CHECK(p.symmetry_order == order);
    CHECK(p.subclass_count == subclasses);
    CHECK(p.angular_domain_deg == doctest::Approx(domain));
    CHECK(effective_stage1_order(p) == order * subclasses);
  };
  check(PartClass::BasePlate, 1, 1, 360.0);
  check(PartClass::Shaft1, 1, 2, 180.0);
  check(PartClass::Shaft2, 1, 2, 180.0);
  check(PartClass::CompoundGear, 12, 1, 30.0);
  check(PartClass::Gear1, 1, 4, 90.0);
  check(PartClass::Gear2, 4, 1, 90.0);
}

TEST_CASE("class names round-trip") {
  for (int i = 0; i < kPartClassCount; ++i) {
    const PartClass c = static_cast<PartClass>(i);
    CHECK(part_class_from_string(to_string(c)) == c);
  }
  CHECK(to_string(PartClass::BasePlate) == "base_plate");
  CHECK(to_string(PartClass::CompoundGear) == "compound_gear");
  CHECK_THROWS_AS(part_class_from_string("sprocket"), std::invalid_argument);
}

TEST_CASE("meshes validate and fit their bounding radius") {
  const auto catalog = builtin_catalog();
  for (const PartSpec& p : catalog) {
    CHECK_NOTHROW(validate_mesh(p.mesh));
    CHECK_FALSE(p.mesh.empty());
    double max_xy = 0.0;
    double min_z = 1e9, max_z = -1e9;
    for (const Vec3& v : p.mesh.vertices) {
      max_xy = std::max(max_xy, std::hypot(v.x(), v.y()));
      min_z = std::min(min_z, v.z());
      max_z = std::max(max_z, v.z());
    }
    CHECK(p.bounding_radius >= max_xy - 1e-12);
    CHECK(p.bounding_radius <= max_xy + 1e-6);
    // Parts rest on the table plane and extend upward.
    CHECK(min_z == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(max_z > 0.0);
  }
}

TEST_CASE("exactly symmetric parts map onto themselves under 360/n") {
  const auto catalog = builtin_catalog();
  auto self_distance = [&](PartClass c, double angle) {
    const Mesh& m = find_part(catalog, c).mesh;
    return hausdorff_vertex_distance(m, transformed(m, rot_z_deg(angle)));
  };
  CHECK(self_distance(PartClass::Gear2, 90.0) < 1e-12);
  CHECK(self_distance(PartClass::CompoundGear, 30.0) < 1e-12);
}

TEST_CASE("near-symmetric parts break symmetry by the asymmetry scale") {
  const auto catalog = builtin_catalog();
  auto self_distance = [&](PartClass c, double angle) {
    const Mesh& m = find_part(catalog, c).mesh;
    return hausdorff_vertex_distance(m, transformed(m, rot_z_deg(angle)));
  };
  // A rotation by one branch moves only the marker feature; with the default
  // 2 mm scale the meshes must differ by at least a millimeter.
  CHECK(self_distance(PartClass::Gear1, 90.0) > 0.001);
  CHECK(self_distance(PartClass::Shaft1, 180.0) > 0.001);
  CHECK(self_distance(PartClass::Shaft2, 180.0) > 0.001);

  // With the marker removed those parts become exactly symmetric.
  CatalogOptions opts;
  opts.asymmetry_scale = 0.0;
  const auto plain = builtin_catalog(opts);
  auto plain_distance = [&](PartClass c, double angle) {
    const Mesh& m = find_part(plain, c).mesh;
    return hausdorff_vertex_distance(m, transformed(m, rot_z_deg(angle)));
  };
  CHECK(plain_distance(PartClass::Gear1, 90.0) < 1e-12);
  CHECK(plain_distance(PartClass::Shaft1, 180.0) < 1e-12);
  CHECK(plain_distance(PartClass::Shaft2, 180.0) < 1e-12);
}

TEST_CASE("config overrides reach dimensions, insertions, and transforms") {
  const ConfigFile cfg = ConfigFile::parse_string(
      "[catalog]\n"
      "gear1_tip_radius = 0.030\n"
      "shaft_1_hole_radius = 0.0060\n"
      "shaft_1_peg_radius = 0.0050\n"
      "gear_1_grasp = 1 0 0 0.01  0 1 0 0.02  0 0 1 0.03\n"
      "gear_2_target = 0 -1 0 0.04  1 0 0 0.05  0 0 1 0.06\n");
  const CatalogOptions opts = catalog_options_from(cfg);
  CHECK(opts.gear1_tip_radius == 0.030);
  CHECK(opts.gear2_tip_radius == CatalogOptions{}.gear2_tip_radius);

  const auto catalog = builtin_catalog(opts);
  // The toothed outline's tips set the planar extent.
  CHECK(find_part(catalog, PartClass::Gear1).bounding_radius ==
        doctest::Approx(0.030).epsilon(1e-9));

  const auto& ins = find_part(catalog, PartClass::Shaft1).insertion;
  REQUIRE(ins.has_value());
  CHECK(ins->hole_radius == 0.0060);
  CHECK(ins->peg_radius == 0.0050);

  const RigidTransform& grasp = find_part(catalog, PartClass::Gear1).grasp_in_part;
  CHECK(grasp.R.isApprox(Mat3::Identity()));
  CHECK(grasp.t.isApprox(Vec3(0.01, 0.02, 0.03)));

  const RigidTransform& target = find_part(catalog, PartClass::Gear2).target_in_plate;
  CHECK(target.R(0, 1) == -1.0);
  CHECK(target.R(1, 0) == 1.0);
  CHECK(target.t.isApprox(Vec3(0.04, 0.05, 0.06)));
}

TEST_CASE("config override rejects lone insertion radii and short transforms") {
  CHECK_THROWS_AS(
      catalog_options_from(ConfigFile::parse_string(
          "[catalog]\nshaft_1_hole_radius = 0.006\n")),
      std::invalid_argument);
  CHECK_THROWS_AS(
      catalog_options_from(ConfigFile::parse_string(
          "[catalog]\ngear_1_grasp = 1 0 0 0 1 0 0 1\n")),
      std::invalid_argument);
  CHECK_THROWS_AS(
      catalog_options_from(ConfigFile::parse_string(
          "[catalog]\ngear_1_grasp = 1 0 0 0 0 1 0 0 0 0 1 0 9\n")),
      std::invalid_argument);
}

TEST_CASE("insertion pairs exist where parts seat into the plate") {
  const auto catalog = builtin_catalog();
  CHECK_FALSE(find_part(catalog, PartClass::BasePlate).insertion.has_value());
  for (PartClass c : {PartClass::Shaft1, PartClass::Shaft2,
                      PartClass::CompoundGear, PartClass::Gear1,
                      PartClass::Gear2}) {
    const auto& ins = find_part(catalog, c).insertion;
    REQUIRE(ins.has_value());
    CHECK(ins->hole_radius > ins->peg_radius);
    CHECK(ins->peg_radius > 0.0);
  }
}

TEST_CASE("fixed detection box is the projected bounding diameter") {
  const auto catalog = builtin_catalog();
  const CameraIntrinsics k = intrinsics_from_hfov(640, 480, 65.0);
  const PartSpec& gear = find_part(catalog, PartClass::Gear1);
  const double side = fixed_bbox_px(gear, k, 0.53);
  CHECK(side ==
        doctest::Approx(2.0 * gear.bounding_radius * k.fx / 0.53).epsilon(1e-9));
  // Closer camera, bigger box.
  CHECK(fixed_bbox_px(gear, k, 0.31) > side);
}

TEST_CASE("find_part rejects a class missing from the catalog") {
  auto catalog = builtin_catalog();
  catalog.erase(catalog.begin());  // drop the plate
  CHECK_THROWS_AS(find_part(catalog, PartClass::BasePlate),
                  std::invalid_argument);
}
