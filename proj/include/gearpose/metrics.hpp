#pragma once

#include <string>
#include <vector>

#include "gearpose/pipeline.hpp"

namespace gearpose {

/// Circular distance between two angles within a wrap-around domain.
/// Result lies in [0, domain/2].
double rotation_error(double est_deg, double gt_deg, double domain_deg);

/// Planar Euclidean distance in millimeters.
double translation_error(const Vec2& est_m, const Vec2& gt_m);

/// Domain a stage-1 coarse angle is identifiable in: 360 / (n * k).
double stage1_rotation_domain(const PartSpec& part);

/// Domain a refined angle is identifiable in: the part's true symmetry,
/// 360 / n. Near-symmetric branches are resolved, exact symmetry is not.
double stage2_rotation_domain(const PartSpec& part);

/// One ground-truth part instance compared against an estimate.
struct EvalSample {
  PartClass class_id = PartClass::BasePlate;
  bool detected = false;
  bool class_correct = false;
  double translation_mm = 0.0;     // valid when detected
  double rotation_deg = 0.0;       // valid when detected
  bool isometry_applicable = false;
  bool isometry_correct = false;   // valid when detected and applicable
};

/// Matches each placed part to the nearest same-class detection within the
/// match radius. Rotation error lives in the stage-1 domain.
std::vector<EvalSample> evaluate_stage1(const Scene& truth,
                                        const std::vector<PartSpec>& catalog,
                                        const std::vector<Detection>& detections,
                                        double match_radius = 0.03);

/// Matches each placed part to the nearest same-class refined pose within
/// the match radius. Rotation error lives in the true-symmetry domain; the
/// near-symmetry branch counts as resolved when the rotation error stays
/// under half an angular domain.
std::vector<EvalSample> evaluate_stage2(const Scene& truth,
                                        const std::vector<PartSpec>& catalog,
                                        const std::vector<RefinedPose>& poses,
                                        double match_radius = 0.03);

struct ErrorStats {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  int count = 0;
};

ErrorStats error_stats(const std::vector<double>& values);

struct PartRow {
  std::string label;
  int truth_count = 0;
  int detected_count = 0;
  double detection_rate = 0.0;
  ErrorStats translation_mm;
  ErrorStats rotation_deg;
  bool isometry_applicable = false;
  double isometry_accuracy = 0.0;
  int isometry_count = 0;
};

/// Per-class rows plus three aggregate rows. `average` is the headline row:
/// rates averaged over part rows, errors pooled over all samples. The two
/// alternatives make the aggregation explicit, since summary rows can be
/// read either way.
struct MetricsReport {
  std::vector<PartRow> parts;
  PartRow average;         // rates: mean of part rows; errors: pooled
  PartRow average_parts;   // everything: unweighted mean of part rows
  PartRow average_pooled;  // everything: pooled over all samples
};

MetricsReport aggregate(const std::vector<EvalSample>& samples);

/// Aligned text table: one row per part plus the Average row, std in
/// parentheses after each mean.
std::string format_table(const MetricsReport& report);

}  // namespace gearpose
