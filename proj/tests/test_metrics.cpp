#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "gearpose/catalog.hpp"
#include "gearpose/metrics.hpp"
#include "gearpose/rng.hpp"

using namespace gearpose;

namespace {

const std::vector<PartSpec>& catalog() {
  static const std::vector<PartSpec> c = builtin_catalog();
  return c;
}

/// Brute-force circular distance: minimum over explicit wrap multiples.
double slow_rotation_error(double est, double gt, double domain) {
  double best = 1e18;
  for (int j = -50; j <= 50; ++j) {
    best = std::min(best, std::abs(est - gt + j * domain));
  }
  return best;
}

}  // namespace

TEST_CASE("rotation error folds into the wrap-around domain") {
  CHECK(rotation_error(10.0, 350.0, 360.0) == doctest::Approx(20.0));
  CHECK(rotation_error(89.0, 1.0, 90.0) == doctest::Approx(2.0));
  CHECK(rotation_error(215.0, 35.0, 90.0) == doctest::Approx(0.0));
  CHECK(rotation_error(0.0, 15.0, 30.0) == doctest::Approx(15.0));

  Rng rng(2718);
  for (int i = 0; i < 2000; ++i) {
    const double est = rng.uniform(-720.0, 720.0);
    const double gt = rng.uniform(-720.0, 720.0);
    const double domain = std::vector<double>{360.0, 180.0, 90.0, 30.0}[
        static_cast<std::size_t>(rng.uniform_int(4))];
    const double got = rotation_error(est, gt, domain);
    CHECK(got == doctest::Approx(slow_rotation_error(est, gt, domain)).epsilon(1e-9));
    CHECK(got >= 0.0);
    CHECK(got <= domain / 2.0 + 1e-12);
  }
  CHECK_THROWS_AS(rotation_error(1.0, 2.0, 0.0), std::invalid_argument);
}

TEST_CASE("translation error is planar distance in millimeters") {
  CHECK(translation_error(Vec2(0.003, 0.004), Vec2(0.0, 0.0)) ==
        doctest::Approx(5.0).epsilon(1e-12));
  CHECK(translation_error(Vec2(0.1, 0.1), Vec2(0.1, 0.1)) == 0.0);
}

TEST_CASE("rotation domains distinguish coarse identifiability from true "
          "symmetry") {
  const struct {
    PartClass c;
    double stage1;
    double stage2;
  } want[] = {
      {PartClass::BasePlate, 360.0, 360.0},
      {PartClass::Shaft1, 180.0, 360.0},
      {PartClass::Shaft2, 180.0, 360.0},
      {PartClass::CompoundGear, 30.0, 30.0},
      {PartClass::Gear1, 90.0, 360.0},
      {PartClass::Gear2, 90.0, 90.0},
  };
  for (const auto& w : want) {
    const PartSpec& p = find_part(catalog(), w.c);
    CHECK(stage1_rotation_domain(p) == w.stage1);
    CHECK(stage2_rotation_domain(p) == w.stage2);
  }
}

TEST_CASE("error_stats computes population moments") {
  const ErrorStats s = error_stats({1.0, 3.0});
  CHECK(s.mean == 2.0);
  CHECK(s.stddev == 1.0);
  CHECK(s.count == 2);

  const ErrorStats single = error_stats({5.0});
  CHECK(single.mean == 5.0);
  CHECK(single.stddev == 0.0);

  const ErrorStats empty = error_stats({});
  CHECK(empty.mean == 0.0);
  CHECK(empty.stddev == 0.0);
  CHECK(empty.count == 0);
}

TEST_CASE("stage-1 evaluation matches nearest same-class detections") {
  Scene truth;
  truth.table_depth = 0.53;
  truth.placements.push_back({PartClass::Gear1, PlanarPose::make(0.0, 0.0, 10.0)});
  truth.placements.push_back({PartClass::Shaft1, PlanarPose::make(0.1, 0.1, 50.0)});
  truth.placements.push_back({PartClass::Gear2, PlanarPose::make(-0.1, 0.05, 30.0)});

  std::vector<Detection> dets;
  Detection d;
  d.class_id = PartClass::Gear1;
  d.world_position = Vec2(0.001, 0.0);
  d.coarse_theta = 12.0;
  dets.push_back(d);
  // A second, farther gear cannot double-claim the same truth instance.
  d.world_position = Vec2(0.004, 0.003);
  dets.push_back(d);
  // Too far away to count as the shaft.
  d.class_id = PartClass::Shaft1;
  d.world_position = Vec2(0.15, 0.1);
  dets.push_back(d);
  // Right spot, wrong class: not a match for the gear_2 instance.
  d.class_id = PartClass::CompoundGear;
  d.world_position = Vec2(-0.1, 0.05);
  dets.push_back(d);

  const auto samples = evaluate_stage1(truth, catalog(), dets, 0.03);
  REQUIRE(samples.size() == 3);

  CHECK(samples[0].detected);
  CHECK(samples[0].class_correct);
  CHECK(samples[0].translation_mm == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(samples[0].rotation_deg == doctest::Approx(2.0).epsilon(1e-9));
  // Branch resolution is not judged at stage 1, even for branched classes.
  CHECK_FALSE(samples[0].isometry_applicable);

  CHECK_FALSE(samples[1].detected);
  CHECK_FALSE(samples[2].detected);
}

TEST_CASE("stage-2 evaluation scores rotation in the true-symmetry domain") {
  Scene truth;
  truth.table_depth = 0.31;
  truth.placements.push_back({PartClass::Gear1, PlanarPose::make(0.0, 0.0, 10.0)});
  truth.placements.push_back({PartClass::Gear2, PlanarPose::make(0.1, 0.0, 30.0)});

  std::vector<RefinedPose> poses;
  RefinedPose r;
  r.class_id = PartClass::Gear1;
  r.position = Vec2(0.0005, 0.0);
  r.final_theta = 14.0;
  poses.push_back(r);
  // A quarter turn on the 4-fold gear is a perfect answer.
  r.class_id = PartClass::Gear2;
  r.position = Vec2(0.1, 0.001);
  r.final_theta = 120.0;
  poses.push_back(r);

  auto samples = evaluate_stage2(truth, catalog(), poses, 0.03);
  REQUIRE(samples.size() == 2);
  CHECK(samples[0].detected);
  CHECK(samples[0].rotation_deg == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(samples[0].isometry_applicable);
  CHECK(samples[0].isometry_correct);
  CHECK(samples[1].detected);
  CHECK(samples[1].rotation_deg == doctest::Approx(0.0).epsilon(1e-9));
  CHECK_FALSE(samples[1].isometry_applicable);

  // A wrong branch is detected but counted as an isometry miss.
  poses[0].final_theta = 100.0;
  samples = evaluate_stage2(truth, catalog(), poses, 0.03);
  CHECK(samples[0].detected);
  CHECK(samples[0].rotation_deg == doctest::Approx(90.0).epsilon(1e-9));
  CHECK(samples[0].isometry_applicable);
  CHECK_FALSE(samples[0].isometry_correct);
}

TEST_CASE("aggregate averages rates over parts and pools errors") {
  std::vector<EvalSample> samples;
  EvalSample s;
  s.class_id = PartClass::Gear1;
  s.detected = true;
  s.class_correct = true;
  s.translation_mm = 1.0;
  s.rotation_deg = 2.0;
  s.isometry_applicable = true;
  s.isometry_correct = true;
  samples.push_back(s);
  s.translation_mm = 3.0;
  s.rotation_deg = 4.0;
  s.isometry_correct = false;
  samples.push_back(s);
  EvalSample miss;
  miss.class_id = PartClass::Shaft1;
  samples.push_back(miss);

  const MetricsReport report = aggregate(samples);
  REQUIRE(report.parts.size() == 2);

  const PartRow& shaft = report.parts[0];  // catalog order: shaft_1 first
  CHECK(shaft.label == "shaft_1");
  CHECK(shaft.truth_count == 1);
  CHECK(shaft.detected_count == 0);
  CHECK(shaft.detection_rate == 0.0);
  CHECK(shaft.translation_mm.count == 0);

  const PartRow& gear = report.parts[1];
  CHECK(gear.label == "gear_1");
  CHECK(gear.truth_count == 2);
  CHECK(gear.detection_rate == 1.0);
  CHECK(gear.translation_mm.mean == 2.0);
  CHECK(gear.translation_mm.stddev == 1.0);
  CHECK(gear.isometry_accuracy == 0.5);
  CHECK(gear.isometry_count == 2);

  // Headline row: rates averaged over part rows, errors pooled.
  CHECK(report.average.detection_rate == 0.5);
  CHECK(report.average.translation_mm.mean == 2.0);
  CHECK(report.average.translation_mm.stddev == 1.0);
  CHECK(report.average.translation_mm.count == 2);
  CHECK(report.average.isometry_accuracy == 0.5);

  CHECK(report.average_pooled.detection_rate == doctest::Approx(2.0 / 3.0));
  CHECK(report.average_parts.detection_rate == 0.5);

  CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
}

TEST_CASE("the metrics table lists every part row plus the average") {
  std::vector<EvalSample> samples;
  for (int c = 0; c < kPartClassCount; ++c) {
    EvalSample s;
    s.class_id = static_cast<PartClass>(c);
    s.detected = true;
    s.class_correct = true;
    s.translation_mm = 1.5;
    s.rotation_deg = 0.25;
    samples.push_back(s);
  }
  const std::string table = format_table(aggregate(samples));

  for (int c = 0; c < kPartClassCount; ++c) {
    CHECK(table.find(std::string(to_string(static_cast<PartClass>(c)))) !=
          std::string::npos);
  }
  CHECK(table.find("average") != std::string::npos);
  CHECK(table.find("100.00%") != std::string::npos);
  CHECK(table.find("1.50 (0.00)") != std::string::npos);
  CHECK(table.find("0.25 (0.00)") != std::string::npos);
  // Header plus six part rows plus the average row.
  CHECK(std::count(table.begin(), table.end(), '\n') == 8);
}
