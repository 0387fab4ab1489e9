#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "gearpose/catalog.hpp"
#include "gearpose/dataset.hpp"
#include "gearpose/render.hpp"
#include "gearpose/sensor.hpp"

namespace gearpose {

/// Stage-1 output: one candidate part in one view. coarse_theta lives in
/// [0, angular_domain) of the class; world_position is the de-projected part
/// center on the table plane.
struct Detection {
  PartClass class_id = PartClass::BasePlate;
  BBox bbox;
  double score = 1.0;        // in (0, 1], higher is better
  double coarse_theta = 0.0; // degrees
  int source_view = 0;
  Vec2 world_position = Vec2::Zero();
};

enum class RefineStatus {
  Ok,
  /// The close-up contained no usable foreground: the prior was wrong enough
  /// that the part left the frame.
  LostPart,
};

/// Stage-2 output. final_theta composes the stage-1 baseline, the resolved
/// branch and the refined residual:
///   final_theta = (coarse_baseline + subclass * angular_domain + residual)
///   mod 360.
struct RefinedPose {
  PartClass class_id = PartClass::BasePlate;
  RefineStatus status = RefineStatus::Ok;
  Vec2 position = Vec2::Zero();  // meters, world frame
  int subclass = 0;
  double residual_dtheta = 0.0;  // degrees in [-10, 10]
  double final_theta = 0.0;      // degrees in [0, 360)
  double score = 0.0;            // in (0, 1], higher is better
  BBox bbox;                     // refined box in the close-up view
  /// Branch-selection cost per subclass, lower wins; the chosen subclass is
  /// the argmin. Measured over the pixels where branch templates disagree,
  /// falling back to the best full-silhouette grid cost when that region is
  /// out of view.
  std::vector<double> subclass_costs;
};

/// Estimation backends implement these two calls. Implementations must be
/// safe to call concurrently once warmed up.
class EstimatorInterface {
 public:
  virtual ~EstimatorInterface() = default;

  virtual std::vector<Detection> stage1(const NormalizedImage& img,
                                        const CameraIntrinsics& k,
                                        const RigidTransform& camera_pose,
                                        double table_depth) const = 0;

  virtual RefinedPose stage2(const NormalizedImage& img,
                             const CameraIntrinsics& k,
                             const RigidTransform& camera_pose,
                             const Detection& prior, const PartSpec& part,
                             double table_depth) const = 0;
};

/// World (x, y) encoded by a detection: its box center de-projected at table
/// depth and transformed out of the camera frame.
Vec2 world_pose_from_detection(const Detection& d, const CameraIntrinsics& k,
                               const RigidTransform& camera_pose,
                               double table_depth);

struct FilterConfig {
  int image_width = 0;
  int image_height = 0;
  double edge_margin_fraction = 0.10;  // of image width
  double duplicate_radius = 0.025;     // meters, world frame
  /// Classes that physically occur at most once; extra sightings beyond the
  /// duplicate radius are still collapsed to the best-scored one.
  std::vector<PartClass> unique_classes = {PartClass::BasePlate};
};

/// Multi-view fusion, applied in order: (1) drop shaft detections near a view
/// edge when another view saw the same instance away from its edge; (2) among
/// different-class detections within the duplicate radius keep the highest
/// score; (3) same for same-class duplicates; (4) collapse unique classes.
/// Idempotent: filtering a filtered list is the identity.
std::vector<Detection> filter_detections(std::vector<Detection> detections,
                                         const FilterConfig& cfg);

/// Close-up camera implied by a stage-1 prior: centered above the estimated
/// position, yawed so an exactly estimated part renders at its canonical
/// image orientation (apparent angle = subclass * domain + residual).
RigidTransform canonical_camera_pose(const Detection& prior,
                                     double stage2_height);

/// Classical template-scoring estimator.
///
/// Stage 1 segments foreground against the table plane, classifies connected
/// components by silhouette signature (equivalent radius, max radius), and
/// scans a 1 degree template grid over the class's angular domain with masked
/// normalized cross-correlation for the coarse angle.
///
/// Stage 2 re-centers on the foreground centroid, then scores rendered
/// canonical templates over every (subclass, residual) pair on a 0.5 degree
/// grid in [-10, 10] by trimmed mean absolute depth difference, refining the
/// winning residual by quadratic interpolation.
class ReferenceEstimator : public EstimatorInterface {
 public:
  struct Options {
    double depth_min = 0.20;  // 8-bit window used by the sensor model
    double depth_max = 0.80;
    double foreground_margin = 0.003;      // meters below the table plane
    double feature_height_fraction = 0.35; // feature contour vs part height
    int min_component_px = 60;
    double coarse_step_deg = 1.0;
    double residual_range_deg = 10.0;
    double residual_step_deg = 0.5;
    double trim_fraction = 0.05;
    /// Blur applied to templates before scoring, matching the expected
    /// sensor blur. Zero for noiseless imagery.
    double template_blur_sigma = 0.0;
  };

  ReferenceEstimator(std::vector<PartSpec> catalog, CameraIntrinsics k);
  ReferenceEstimator(std::vector<PartSpec> catalog, CameraIntrinsics k,
                     Options opts);

  /// Builds the stage-2 template caches for the given table depths. Caches
  /// are read-only afterwards, making stage2 safe to call concurrently.
  void warm_up(const std::vector<double>& stage2_table_depths);

  std::vector<Detection> stage1(const NormalizedImage& img,
                                const CameraIntrinsics& k,
                                const RigidTransform& camera_pose,
                                double table_depth) const override;

  RefinedPose stage2(const NormalizedImage& img, const CameraIntrinsics& k,
                     const RigidTransform& camera_pose, const Detection& prior,
                     const PartSpec& part, double table_depth) const override;

  const Options& options() const { return opts_; }
  const std::vector<PartSpec>& catalog() const { return catalog_; }

 private:
  struct Template {
    DepthImage crop;         // depth patch around the part
    int origin_u = 0;        // crop offset in the full template frame
    int origin_v = 0;
    double centroid_u = 0.0; // feature-pixel centroid, full-frame pixels
    double centroid_v = 0.0;
    Vec2 surface_centroid = Vec2::Zero();  // world xy, part at origin
    double angle_deg = 0.0;
  };
  struct TemplateGrid {
    std::vector<Template> templates;  // subclass-major, residual-minor
    /// Per template: crop pixels where branches disagree at this residual.
    /// Branch costs restricted to these pixels keep the decision on the
    /// asymmetry feature instead of diluting it across the whole silhouette.
    std::vector<std::vector<std::pair<int, int>>> distinct;
    int per_subclass = 0;
  };
  struct Signature {
    double r_eq = 0.0;
    double r_max = 0.0;
  };

  const TemplateGrid& stage2_grid(PartClass c, double table_depth) const;
  Template render_template(const PartSpec& part, double angle_deg,
                           double table_depth, double blur_sigma) const;
  /// One signature per blur level. With template blur configured the family
  /// spans the sensor's blur band, since the per-image draw is unknown;
  /// classification takes the nearest family member.
  const std::vector<Signature>& class_signature(PartClass c,
                                                double table_depth) const;

  std::vector<PartSpec> catalog_;
  CameraIntrinsics k_;
  Options opts_;
  // Keyed by (class, table depth in 0.1 mm). Filled by warm_up, or lazily on
  // first use when running single-threaded.
  mutable std::map<std::pair<int, long>, TemplateGrid> grids_;
  mutable std::map<std::pair<int, long>, std::vector<Signature>> signatures_;
};

/// One stage-1 capture set: images through parallel cameras over one scene.
struct ViewSet {
  std::vector<NormalizedImage> images;
  std::vector<RigidTransform> cameras;
  CameraIntrinsics k;
  double table_depth = 0.0;
};

/// Camera centers for a 3x3 view grid covering a workspace rectangle with
/// the given fractional overlap between neighboring views.
std::vector<Vec2> view_grid_centers(double workspace_x, double workspace_y,
                                    const CameraIntrinsics& k, double height,
                                    double overlap_fraction = 0.20);

struct EstimateOptions {
  double stage2_height = 0.31;
  bool noise_enabled = false;
  SensorNoiseConfig noise;
  std::uint64_t closeup_seed = 0;
  FilterConfig filter;  // width/height filled from the view intrinsics
};

struct EstimateResult {
  std::vector<RefinedPose> poses;
  std::vector<Detection> detections;  // the filtered stage-1 survivors
};

/// Full pipeline over one scene: stage 1 on every view, multi-view filtering,
/// then one synthesized canonical close-up and stage-2 refinement per
/// surviving detection. The close-up is rendered from the true scene; the
/// renderer stands in for the robot moving the camera.
EstimateResult estimate_all(const ViewSet& views, const Scene& true_scene,
                            const std::vector<PartSpec>& catalog,
                            const EstimatorInterface& estimator,
                            const EstimateOptions& opts);

}  // namespace gearpose
