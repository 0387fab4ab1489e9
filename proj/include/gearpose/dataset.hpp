#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "gearpose/catalog.hpp"
#include "gearpose/render.hpp"
#include "gearpose/sensor.hpp"

namespace gearpose {

/// Axis-aligned detection box in pixel coordinates; width/height are fixed
/// per class and capture height.
struct BBox {
  double center_u = 0.0;
  double center_v = 0.0;
  double width = 0.0;
  double height = 0.0;
};

struct Stage1Label {
  PartClass class_id = PartClass::BasePlate;
  BBox bbox;
  double sin_n_theta = 0.0;
  double cos_n_theta = 1.0;
};

struct Stage2Label {
  int subclass = 0;
  double residual_dtheta = 0.0;  // degrees, the drawn perturbation
  BBox perturbed_bbox;
  PlanarPose true_planar_pose;
};

/// Splits a yaw into the near-symmetry branch and the in-branch residual:
/// theta = subclass * angular_domain + residual (+ a multiple of
/// angular_domain * subclass_count). residual lies in [0, angular_domain).
struct CanonicalAngle {
  int subclass = 0;
  double residual_deg = 0.0;
};

CanonicalAngle canonical_angle(double theta_deg, const PartSpec& part);

/// (sin, cos) of n_eff * theta: the continuous orientation encoding that is
/// periodic in the part's stage-1 angular domain.
std::pair<double, double> encode_orientation(double theta_deg, int n_eff);

/// Inverse of encode_orientation into [0, 360 / n_eff). Rejects pairs with
/// norm below 0.1 (no meaningful angle).
double decode_orientation(double sin_n_theta, double cos_n_theta, int n_eff);

struct GenConfig {
  std::uint64_t master_seed = 1;
  double stage1_height = 0.53;
  double stage2_height = 0.31;
  CameraIntrinsics intrinsics;  // zero width means "use the default camera"

  double placement_margin = 0.005;  // added between bounding circles, meters
  int placement_attempts = 1000;

  double perturb_xy = 0.010;      // stage-2 prior error, +/- meters
  double perturb_theta = 10.0;    // degrees

  /// Explicit workspace rectangle (full extents, meters). Zero means "the
  /// single-view footprint at stage1_height".
  double workspace_x = 0.0;
  double workspace_y = 0.0;

  bool noise_enabled = true;
  SensorNoiseConfig noise;
};

CameraIntrinsics default_intrinsics();
CameraIntrinsics effective_intrinsics(const GenConfig& cfg);
SensorNoiseConfig effective_noise(const GenConfig& cfg);

struct Stage1Sample {
  int index = 0;
  Scene scene;
  RigidTransform camera_pose;
  std::vector<Stage1Label> labels;
  std::uint64_t noise_seed = 0;
};

struct Stage2Sample {
  int index = 0;
  PartClass class_id = PartClass::BasePlate;
  Scene scene;  // the single part at its perturbed pose
  RigidTransform camera_pose;  // canonical close-up camera
  Stage2Label label;
  std::uint64_t noise_seed = 0;
};

/// Distal training scenes: 1 to 5 non-overlapping parts, 3.2 per scene on
/// average, classes balanced by cycling shuffled class rounds. Each sample
/// derives from (master_seed, index) alone, so any scene can be generated
/// without its predecessors and independent of thread count.
Stage1Sample stage1_sample_at(const GenConfig& cfg,
                              const std::vector<PartSpec>& catalog, int index);

/// Close-up refinement sample for one part and branch: the camera sits at
/// the canonical pose implied by the unperturbed planar pose; the part is
/// placed at the perturbed pose; the label stores the drawn perturbation.
Stage2Sample stage2_sample_at(const GenConfig& cfg, const PartSpec& part,
                              int subclass, int index);

/// Degraded 8-bit view of a sample, rendered on demand.
NormalizedImage render_sample_image(const GenConfig& cfg,
                                    const std::vector<PartSpec>& catalog,
                                    const Scene& scene,
                                    const RigidTransform& camera_pose,
                                    std::uint64_t noise_seed);

// --- on-disk dataset ---

struct DatasetInfo {
  std::string split;  // "stage1" or "stage2"
  int count = 0;
  std::uint64_t master_seed = 0;
  double table_depth = 0.0;
  double workspace_x = 0.0;
  double workspace_y = 0.0;
  bool noise_enabled = true;
  PartClass part = PartClass::BasePlate;  // stage2 splits only
  int subclass = 0;                       // stage2 splits only
};

void write_stage1_dataset(const std::filesystem::path& dir,
                          const GenConfig& cfg,
                          const std::vector<PartSpec>& catalog, int count,
                          bool with_images, const std::string& config_hash);

void write_stage2_dataset(const std::filesystem::path& dir,
                          const GenConfig& cfg,
                          const std::vector<PartSpec>& catalog, PartClass part,
                          int subclass, int count, bool with_images,
                          const std::string& config_hash);

DatasetInfo read_dataset_info(const std::filesystem::path& dir);
Stage1Sample read_stage1_record(const std::filesystem::path& dir, int index);
Stage2Sample read_stage2_record(const std::filesystem::path& dir, int index,
                                const std::vector<PartSpec>& catalog);

}  // namespace gearpose
