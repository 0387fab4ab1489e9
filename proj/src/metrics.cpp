#include "gearpose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace gearpose {

namespace {

/// Shared matching core: truth instances against estimate positions of the
/// same class, greedy nearest within the radius.
template <typename Estimate>
std::vector<EvalSample> match_instances(
    const Scene& truth, const std::vector<PartSpec>& catalog,
    const std::vector<Estimate>& estimates, double match_radius,
    PartClass (*class_of)(const Estimate&), Vec2 (*position_of)(const Estimate&),
    void (*fill_errors)(const Estimate&, const Placement&, const PartSpec&,
                        EvalSample&)) {
  std::vector<bool> used(estimates.size(), false);
  std::vector<EvalSample> samples;
  for (const Placement& p : truth.placements) {
    const PartSpec& part = find_part(catalog, p.class_id);
    EvalSample s;
    s.class_id = p.class_id;
    s.isometry_applicable = part.subclass_count > 1;

    int best = -1;
    double best_dist = match_radius;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
      if (used[i] || class_of(estimates[i]) != p.class_id) continue;
      const double dist =
          (position_of(estimates[i]) - Vec2(p.pose.x, p.pose.y)).norm();
      if (dist <= best_dist) {
        best_dist = dist;
        best = static_cast<int>(i);
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      s.detected = true;
      s.class_correct = true;
      fill_errors(estimates[static_cast<std::size_t>(best)], p, part, s);
    }
    samples.push_back(s);
  }
  return samples;
}

std::string format_mean_std(const ErrorStats& s) {
  char buf[64];
  if (s.count == 0) {
    return "-";
  }
  std::snprintf(buf, sizeof(buf), "%.2f (%.2f)", s.mean, s.stddev);
  return buf;
}

std::string format_rate(double rate, bool applicable) {
  if (!applicable) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", rate * 100.0);
  return buf;
}

}  // namespace

double rotation_error(double est_deg, double gt_deg, double domain_deg) {
  if (!(domain_deg > 0.0)) {
    throw std::invalid_argument("rotation_error: domain must be positive");
  }
  double delta = std::fmod(std::abs(est_deg - gt_deg), domain_deg);
  return std::min(delta, domain_deg - delta);
}

double translation_error(const Vec2& est_m, const Vec2& gt_m) {
  return (est_m - gt_m).norm() * 1000.0;
}

double stage1_rotation_domain(const PartSpec& part) {
  return part.angular_domain_deg;
}

double stage2_rotation_domain(const PartSpec& part) {
  return 360.0 / part.symmetry_order;
}

std::vector<EvalSample> evaluate_stage1(const Scene& truth,
                                        const std::vector<PartSpec>& catalog,
                                        const std::vector<Detection>& detections,
                                        double match_radius) {
  return match_instances<Detection>(
      truth, catalog, detections, match_radius,
      [](const Detection& d) { return d.class_id; },
      [](const Detection& d) { return d.world_position; },
      [](const Detection& d, const Placement& p, const PartSpec& part,
         EvalSample& s) {
        s.translation_mm =
            translation_error(d.world_position, Vec2(p.pose.x, p.pose.y));
        s.rotation_deg = rotation_error(d.coarse_theta, p.pose.theta_deg,
                                        stage1_rotation_domain(part));
        // Branch resolution is a stage-2 concern.
        s.isometry_applicable = false;
      });
}

std::vector<EvalSample> evaluate_stage2(const Scene& truth,
                                        const std::vector<PartSpec>& catalog,
                                        const std::vector<RefinedPose>& poses,
                                        double match_radius) {
  return match_instances<RefinedPose>(
      truth, catalog, poses, match_radius,
      [](const RefinedPose& r) { return r.class_id; },
      [](const RefinedPose& r) { return r.position; },
      [](const RefinedPose& r, const Placement& p, const PartSpec& part,
         EvalSample& s) {
        s.translation_mm =
            translation_error(r.position, Vec2(p.pose.x, p.pose.y));
        s.rotation_deg = rotation_error(r.final_theta, p.pose.theta_deg,
                                        stage2_rotation_domain(part));
        if (s.isometry_applicable) {
          s.isometry_correct = s.rotation_deg < part.angular_domain_deg / 2.0;
        }
      });
}

ErrorStats error_stats(const std::vector<double>& values) {
  ErrorStats s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / s.count;
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / s.count);
  return s;
}

MetricsReport aggregate(const std::vector<EvalSample>& samples) {
  if (samples.empty()) {
    throw std::invalid_argument("aggregate: no samples");
  }

  MetricsReport report;
  std::vector<double> all_trans, all_rot;
  int all_truth = 0, all_detected = 0, all_iso_count = 0, all_iso_correct = 0;

  for (int c = 0; c < kPartClassCount; ++c) {
    const PartClass cls = static_cast<PartClass>(c);
    PartRow row;
    row.label = std::string(to_string(cls));
    std::vector<double> trans, rot;
    int iso_correct = 0;
    for (const EvalSample& s : samples) {
      if (s.class_id != cls) continue;
      ++row.truth_count;
      if (!s.detected) continue;
      ++row.detected_count;
      trans.push_back(s.translation_mm);
      rot.push_back(s.rotation_deg);
      if (s.isometry_applicable) {
        row.isometry_applicable = true;
        ++row.isometry_count;
        if (s.isometry_correct) ++iso_correct;
      }
    }
    if (row.truth_count == 0) continue;
    row.detection_rate =
        static_cast<double>(row.detected_count) / row.truth_count;
    row.translation_mm = error_stats(trans);
    row.rotation_deg = error_stats(rot);
    if (row.isometry_count > 0) {
      row.isometry_accuracy =
          static_cast<double>(iso_correct) / row.isometry_count;
    }
    all_truth += row.truth_count;
    all_detected += row.detected_count;
    all_iso_count += row.isometry_count;
    all_iso_correct += iso_correct;
    all_trans.insert(all_trans.end(), trans.begin(), trans.end());
    all_rot.insert(all_rot.end(), rot.begin(), rot.end());
    report.parts.push_back(std::move(row));
  }

  const auto mean_of_rows = [&](auto getter, auto filter) {
    double sum = 0.0;
    int n = 0;
    for (const PartRow& r : report.parts) {
      if (!filter(r)) continue;
      sum += getter(r);
      ++n;
    }
    return n > 0 ? sum / n : 0.0;
  };
  const auto any_part = [](const PartRow&) { return true; };
  const auto iso_part = [](const PartRow& r) { return r.isometry_count > 0; };

  PartRow pooled;
  pooled.label = "average_pooled";
  pooled.truth_count = all_truth;
  pooled.detected_count = all_detected;
  pooled.detection_rate =
      all_truth > 0 ? static_cast<double>(all_detected) / all_truth : 0.0;
  pooled.translation_mm = error_stats(all_trans);
  pooled.rotation_deg = error_stats(all_rot);
  pooled.isometry_applicable = all_iso_count > 0;
  pooled.isometry_count = all_iso_count;
  pooled.isometry_accuracy =
      all_iso_count > 0 ? static_cast<double>(all_iso_correct) / all_iso_count
                        : 0.0;

  PartRow averaged;
  averaged.label = "average_of_parts";
  averaged.truth_count = all_truth;
  averaged.detected_count = all_detected;
  averaged.detection_rate = mean_of_rows(
      [](const PartRow& r) { return r.detection_rate; }, any_part);
  averaged.translation_mm.mean = mean_of_rows(
      [](const PartRow& r) { return r.translation_mm.mean; }, any_part);
  averaged.translation_mm.stddev = mean_of_rows(
      [](const PartRow& r) { return r.translation_mm.stddev; }, any_part);
  averaged.translation_mm.count = static_cast<int>(all_trans.size());
  averaged.rotation_deg.mean = mean_of_rows(
      [](const PartRow& r) { return r.rotation_deg.mean; }, any_part);
  averaged.rotation_deg.stddev = mean_of_rows(
      [](const PartRow& r) { return r.rotation_deg.stddev; }, any_part);
  averaged.rotation_deg.count = static_cast<int>(all_rot.size());
  averaged.isometry_applicable = all_iso_count > 0;
  averaged.isometry_count = all_iso_count;
  averaged.isometry_accuracy = mean_of_rows(
      [](const PartRow& r) { return r.isometry_accuracy; }, iso_part);

  report.average = pooled;
  report.average.label = "average";
  report.average.detection_rate = averaged.detection_rate;
  report.average.isometry_accuracy = averaged.isometry_accuracy;
  report.average_parts = std::move(averaged);
  report.average_pooled = std::move(pooled);
  return report;
}

std::string format_table(const MetricsReport& report) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-14s %-15s %-22s %-22s %-12s\n", "Part",
                "Detection Rate", "Translation Acc (mm)", "Rotation Acc (deg)",
                "Isometry");
  out += line;
  const auto emit = [&](const PartRow& r) {
    std::snprintf(line, sizeof(line), "%-14s %-15s %-22s %-22s %-12s\n",
                  r.label.c_str(),
                  format_rate(r.detection_rate, true).c_str(),
                  format_mean_std(r.translation_mm).c_str(),
                  format_mean_std(r.rotation_deg).c_str(),
                  format_rate(r.isometry_accuracy, r.isometry_count > 0).c_str());
    out += line;
  };
  for (const PartRow& r : report.parts) emit(r);
  emit(report.average);
  return out;
}

}  // namespace gearpose
