#include "doctest.h"

#include <cmath>

#include "gearpose/catalog.hpp"
#include "gearpose/render.hpp"
#include "gearpose/rng.hpp"

using namespace gearpose;

namespace {

const std::vector<PartSpec>& catalog() {
  static const std::vector<PartSpec> c = builtin_catalog();
  return c;
}

CameraIntrinsics small_camera() { return intrinsics_from_hfov(96, 72, 65.0); }

}  // namespace

TEST_CASE("empty scene renders the table plane depth everywhere") {
  Scene scene;
  scene.table_depth = 0.53;
  const CameraIntrinsics k = small_camera();
  const DepthImage img =
      render(scene, catalog(), k, top_down_camera(0.0, 0.0, 0.53));
  for (Eigen::Index i = 0; i < img.data.size(); ++i) {
    CHECK(img.data(i) == doctest::Approx(0.53).epsilon(1e-12));
  }
}

TEST_CASE("a centered part raises depth readings by its height") {
  Scene scene;
  scene.table_depth = 0.40;
  scene.placements.push_back(
      {PartClass::Gear2, PlanarPose::make(0.0, 0.0, 0.0)});
  const CameraIntrinsics k = intrinsics_from_hfov(160, 120, 65.0);
  const DepthImage img =
      render(scene, catalog(), k, top_down_camera(0.0, 0.0, 0.40));
  // The exact center looks straight down the 5 mm bore onto the table, so
  // probe a pixel on the ring body instead (radius ~18 mm, clear of the
  // bosses which reach out to 16.5 mm).  Gear 2 is 10 mm thick.
  CHECK(img.data(60, 80) == doctest::Approx(0.40).epsilon(1e-12));
  CHECK(img.data(56, 84) == doctest::Approx(0.40 - 0.010).epsilon(1e-9));
  // Far corner still reads the table.
  CHECK(img.data(0, 0) == doctest::Approx(0.40).epsilon(1e-12));
}

TEST_CASE("scene validation rejects overlap and bad depth") {
  Scene scene;
  scene.table_depth = 0.0;
  CHECK_THROWS_AS(validate_scene(scene, catalog()), std::invalid_argument);
  scene.table_depth = 0.5;
  scene.placements.push_back(
      {PartClass::Gear1, PlanarPose::make(0.0, 0.0, 0.0)});
  scene.placements.push_back(
      {PartClass::Gear1, PlanarPose::make(0.01, 0.0, 0.0)});
  CHECK_THROWS_AS(validate_scene(scene, catalog()), std::invalid_argument);
  scene.placements.pop_back();
  CHECK_NOTHROW(validate_scene(scene, catalog()));
}

TEST_CASE("rasterizer agrees with the ray-casting reference") {
  Rng rng(17);
  const CameraIntrinsics k = intrinsics_from_hfov(64, 48, 65.0);
  for (int trial = 0; trial < 2; ++trial) {
    Scene scene;
    scene.table_depth = 0.53;
    scene.placements.push_back(
        {trial == 0 ? PartClass::Gear2 : PartClass::Shaft1,
         PlanarPose::make(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                          rng.uniform(0.0, 360.0))});
    const RigidTransform cam = top_down_camera(0.0, 0.0, 0.53);
    const DepthImage a = render(scene, catalog(), k, cam);
    const DepthImage b = raycast_reference(scene, catalog(), k, cam);
    int mismatched = 0;
    for (Eigen::Index i = 0; i < a.data.size(); ++i) {
      if (std::abs(a.data(i) - b.data(i)) > 1e-6) ++mismatched;
    }
    // Edge pixels may legitimately disagree; the bulk must match.
    CHECK(mismatched <= a.data.size() / 200);
  }
}

TEST_CASE("exactly symmetric parts render bit-identically under 360/n") {
  const CameraIntrinsics k = intrinsics_from_hfov(320, 240, 65.0);
  auto render_at = [&](PartClass c, double theta) {
    Scene scene;
    scene.table_depth = 0.31;
    scene.placements.push_back(
        {c, PlanarPose::make(0.013, -0.007, theta)});
    return render(scene, catalog(), k, top_down_camera(0.0, 0.0, 0.31));
  };
  const DepthImage g2a = render_at(PartClass::Gear2, 17.0);
  const DepthImage g2b = render_at(PartClass::Gear2, 17.0 + 90.0);
  CHECK((g2a.data == g2b.data).all());

  const DepthImage cga = render_at(PartClass::CompoundGear, 5.0);
  const DepthImage cgb = render_at(PartClass::CompoundGear, 5.0 + 30.0);
  CHECK((cga.data == cgb.data).all());
}

TEST_CASE("near-symmetric parts do not render identically under a branch") {
  const CameraIntrinsics k = intrinsics_from_hfov(320, 240, 65.0);
  auto render_at = [&](double theta) {
    Scene scene;
    scene.table_depth = 0.31;
    scene.placements.push_back(
        {PartClass::Gear1, PlanarPose::make(0.0, 0.0, theta)});
    return render(scene, catalog(), k, top_down_camera(0.0, 0.0, 0.31));
  };
  const DepthImage a = render_at(10.0);
  const DepthImage b = render_at(100.0);
  CHECK_FALSE((a.data == b.data).all());
}

TEST_CASE("geometry below the table plane never wins the depth test") {
  // Both renderers clip against the table, so a part sunk through the plane
  // cannot produce readings deeper than the table.
  Scene scene;
  scene.table_depth = 0.40;
  scene.placements.push_back(
      {PartClass::Gear2, PlanarPose::make(0.0, 0.0, 0.0)});
  const CameraIntrinsics k = small_camera();
  const DepthImage img =
      render(scene, catalog(), k, top_down_camera(0.0, 0.0, 0.40));
  CHECK(img.data.maxCoeff() <= 0.40 + 1e-12);
}
