#include "gearpose/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "gearpose/rng.hpp"

namespace gearpose {

namespace {

using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

constexpr double kInf = std::numeric_limits<double>::infinity();

/// 8-bit value 0 marks dropped-out or never-written pixels; depths there are
/// meaningless.
BoolGrid valid_mask(const NormalizedImage& img) {
  return img.data != 0;
}

BoolGrid foreground_mask(const DepthImage& depth, const BoolGrid& valid,
                         double table_depth, double margin) {
  return valid && (depth.data < table_depth - margin);
}

/// 3x3 morphological opening; keeps solid regions, strips thin noise bridges.
BoolGrid open_mask(const BoolGrid& mask) {
  const int h = static_cast<int>(mask.rows());
  const int w = static_cast<int>(mask.cols());
  BoolGrid eroded = BoolGrid::Constant(h, w, false);
  for (int v = 1; v + 1 < h; ++v) {
    for (int u = 1; u + 1 < w; ++u) {
      eroded(v, u) = mask.block(v - 1, u - 1, 3, 3).all();
    }
  }
  BoolGrid dilated = BoolGrid::Constant(h, w, false);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const int v0 = std::max(0, v - 1), v1 = std::min(h - 1, v + 1);
      const int u0 = std::max(0, u - 1), u1 = std::min(w - 1, u + 1);
      dilated(v, u) = eroded.block(v0, u0, v1 - v0 + 1, u1 - u0 + 1).any();
    }
  }
  return dilated;
}

/// 4-connected component labels in row-major discovery order; -1 outside.
Eigen::ArrayXXi label_components(const BoolGrid& mask, int* count_out) {
  const int h = static_cast<int>(mask.rows());
  const int w = static_cast<int>(mask.cols());
  Eigen::ArrayXXi labels = Eigen::ArrayXXi::Constant(h, w, -1);
  int next = 0;
  std::vector<std::pair<int, int>> stack;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      if (!mask(v, u) || labels(v, u) >= 0) continue;
      labels(v, u) = next;
      stack.push_back({v, u});
      while (!stack.empty()) {
        const auto [cv, cu] = stack.back();
        stack.pop_back();
        const int dv[4] = {-1, 1, 0, 0};
        const int du[4] = {0, 0, -1, 1};
        for (int i = 0; i < 4; ++i) {
          const int nv = cv + dv[i], nu = cu + du[i];
          if (nv < 0 || nv >= h || nu < 0 || nu >= w) continue;
          if (!mask(nv, nu) || labels(nv, nu) >= 0) continue;
          labels(nv, nu) = next;
          stack.push_back({nv, nu});
        }
      }
      ++next;
    }
  }
  if (count_out) *count_out = next;
  return labels;
}

struct PixelRegion {
  std::vector<std::pair<int, int>> pixels;  // (v, u)
  int min_u = 0, max_u = 0, min_v = 0, max_v = 0;
};

std::vector<PixelRegion> collect_components(const Eigen::ArrayXXi& labels,
                                            int count) {
  std::vector<PixelRegion> regions(static_cast<std::size_t>(count));
  for (auto& r : regions) {
    r.min_u = r.min_v = std::numeric_limits<int>::max();
    r.max_u = r.max_v = std::numeric_limits<int>::min();
  }
  for (int v = 0; v < labels.rows(); ++v) {
    for (int u = 0; u < labels.cols(); ++u) {
      const int l = labels(v, u);
      if (l < 0) continue;
      auto& r = regions[static_cast<std::size_t>(l)];
      r.pixels.push_back({v, u});
      r.min_u = std::min(r.min_u, u);
      r.max_u = std::max(r.max_u, u);
      r.min_v = std::min(r.min_v, v);
      r.max_v = std::max(r.max_v, v);
    }
  }
  return regions;
}

/// Feature pixels of one component: everything inside the padded component
/// box that clears the feature contour and belongs to the same unopened
/// region. The contour sits at a fraction of the part height so that blur
/// skirts around the silhouette stay out while low part surfaces stay in.
struct Features {
  std::vector<std::pair<int, int>> pixels;
  double surface_depth = kInf;
};

constexpr int kFeaturePadPx = 8;

Features feature_pixels(const PixelRegion& comp, const DepthImage& depth,
                        const BoolGrid& valid, const Eigen::ArrayXXi& raw_labels,
                        double table_depth, double margin,
                        double height_fraction) {
  // The near-top surface depth comes from a low quantile rather than the
  // minimum: the minimum of thousands of noisy readings runs several sigma
  // hot, which would sink the contour below what is left of a thin part
  // after blur. The first quartile still lands on the top surface for every
  // catalog part while moving under a sigma with sensor noise.
  std::vector<double> depths;
  depths.reserve(comp.pixels.size());
  std::vector<int> raw_ids;
  for (const auto& [v, u] : comp.pixels) {
    depths.push_back(depth.data(v, u));
    const int l = raw_labels(v, u);
    if (l >= 0 && std::find(raw_ids.begin(), raw_ids.end(), l) == raw_ids.end()) {
      raw_ids.push_back(l);
    }
  }
  const auto q = depths.begin() + static_cast<std::ptrdiff_t>(
      static_cast<double>(depths.size() - 1) * 0.25);
  std::nth_element(depths.begin(), q, depths.end());
  const double surface_depth = *q;
  const double height = table_depth - surface_depth;
  const double contour = table_depth - std::max(margin, height_fraction * height);

  Features f;
  f.surface_depth = surface_depth;
  const int h = static_cast<int>(depth.data.rows());
  const int w = static_cast<int>(depth.data.cols());
  const int v0 = std::max(0, comp.min_v - kFeaturePadPx);
  const int v1 = std::min(h - 1, comp.max_v + kFeaturePadPx);
  const int u0 = std::max(0, comp.min_u - kFeaturePadPx);
  const int u1 = std::min(w - 1, comp.max_u + kFeaturePadPx);
  for (int v = v0; v <= v1; ++v) {
    for (int u = u0; u <= u1; ++u) {
      if (!valid(v, u) || depth.data(v, u) >= contour) continue;
      const int l = raw_labels(v, u);
      if (std::find(raw_ids.begin(), raw_ids.end(), l) == raw_ids.end()) continue;
      f.pixels.push_back({v, u});
    }
  }
  return f;
}

struct SurfaceStats {
  Vec2 centroid_world = Vec2::Zero();  // mean of per-pixel de-projections
  Vec2 centroid_px = Vec2::Zero();     // (u, v)
  double r_eq = 0.0;
  double r_max = 0.0;
};

SurfaceStats surface_stats(const std::vector<std::pair<int, int>>& pixels,
                           const DepthImage& depth, const CameraIntrinsics& k,
                           const RigidTransform& camera_pose) {
  if (pixels.empty()) {
    throw std::invalid_argument("surface_stats: empty pixel set");
  }
  SurfaceStats s;
  std::vector<Vec2> world;
  world.reserve(pixels.size());
  double area = 0.0;
  for (const auto& [v, u] : pixels) {
    const double d = depth.data(v, u);
    const Vec3 p = apply(camera_pose, deproject(Vec2(u, v), d, k));
    world.push_back(p.head<2>());
    s.centroid_world += p.head<2>();
    s.centroid_px += Vec2(u, v);
    area += (d / k.fx) * (d / k.fy);
  }
  const double n = static_cast<double>(pixels.size());
  s.centroid_world /= n;
  s.centroid_px /= n;
  s.r_eq = std::sqrt(area / (3.141592653589793238462643383279502884));
  // The outer radius uses a high quantile, not the maximum: a handful of
  // stray noise pixels tied into the component must not be able to grow a
  // gear into the next class up.
  std::vector<double> radii;
  radii.reserve(world.size());
  for (const Vec2& p : world) {
    radii.push_back((p - s.centroid_world).norm());
  }
  const auto q = radii.begin() + static_cast<std::ptrdiff_t>(
      static_cast<double>(radii.size() - 1) * 0.95);
  std::nth_element(radii.begin(), q, radii.end());
  s.r_max = *q;
  return s;
}

Vec2 rotate_deg(const Vec2& v, double deg) {
  const double c = std::cos(deg_to_rad(deg));
  const double s = std::sin(deg_to_rad(deg));
  return Vec2(c * v.x() - s * v.y(), s * v.x() + c * v.y());
}

double trimmed_mean(std::vector<double>& values, double trim_fraction) {
  if (values.empty()) return kInf;
  std::sort(values.begin(), values.end());
  const std::size_t drop =
      static_cast<std::size_t>(std::floor(trim_fraction * values.size()));
  const std::size_t keep = values.size() - drop;
  double sum = 0.0;
  for (std::size_t i = 0; i < keep; ++i) sum += values[i];
  return sum / static_cast<double>(keep);
}

bool near_edge(const Detection& d, const FilterConfig& cfg) {
  const double margin = cfg.edge_margin_fraction * cfg.image_width;
  return d.bbox.center_u < margin ||
         d.bbox.center_u > cfg.image_width - 1 - margin ||
         d.bbox.center_v < margin ||
         d.bbox.center_v > cfg.image_height - 1 - margin;
}

bool is_shaft(PartClass c) {
  return c == PartClass::Shaft1 || c == PartClass::Shaft2;
}

}  // namespace

Vec2 world_pose_from_detection(const Detection& d, const CameraIntrinsics& k,
                               const RigidTransform& camera_pose,
                               double table_depth) {
  const Vec3 cam_pt =
      deproject(Vec2(d.bbox.center_u, d.bbox.center_v), table_depth, k);
  return apply(camera_pose, cam_pt).head<2>();
}

std::vector<Detection> filter_detections(std::vector<Detection> detections,
                                         const FilterConfig& cfg) {
  if (cfg.image_width <= 0 || cfg.image_height <= 0) {
    throw std::invalid_argument("filter_detections: image size not set");
  }
  // Deterministic processing order: best score first.
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (a.source_view != b.source_view)
                       return a.source_view < b.source_view;
                     return a.bbox.center_u < b.bbox.center_u;
                   });

  const auto close = [&cfg](const Detection& a, const Detection& b) {
    return (a.world_position - b.world_position).norm() <= cfg.duplicate_radius;
  };

  // Filter 1: edge shafts that some other view saw properly.
  std::vector<Detection> pass1;
  for (const Detection& d : detections) {
    bool drop = false;
    if (is_shaft(d.class_id) && near_edge(d, cfg)) {
      for (const Detection& e : detections) {
        if (&e == &d || e.class_id != d.class_id) continue;
        if (e.source_view == d.source_view) continue;
        if (close(d, e) && !near_edge(e, cfg)) {
          drop = true;
          break;
        }
      }
    }
    if (!drop) pass1.push_back(d);
  }

  // Filter 2: cross-class duplicates; filter 3: same-class duplicates. Both
  // keep the highest score, which is the first seen in sorted order.
  std::vector<Detection> pass2;
  for (const Detection& d : pass1) {
    bool drop = false;
    for (const Detection& kept : pass2) {
      if (kept.class_id != d.class_id && close(d, kept)) {
        drop = true;
        break;
      }
    }
    if (!drop) pass2.push_back(d);
  }
  std::vector<Detection> pass3;
  for (const Detection& d : pass2) {
    bool drop = false;
    for (const Detection& kept : pass3) {
      if (kept.class_id == d.class_id && close(d, kept)) {
        drop = true;
        break;
      }
    }
    if (!drop) pass3.push_back(d);
  }

  // Filter 4: physically unique classes keep their best sighting only.
  std::vector<Detection> out;
  for (const Detection& d : pass3) {
    const bool unique =
        std::find(cfg.unique_classes.begin(), cfg.unique_classes.end(),
                  d.class_id) != cfg.unique_classes.end();
    bool drop = false;
    if (unique) {
      for (const Detection& kept : out) {
        if (kept.class_id == d.class_id) {
          drop = true;
          break;
        }
      }
    }
    if (!drop) out.push_back(d);
  }
  return out;
}

RigidTransform canonical_camera_pose(const Detection& prior,
                                     double stage2_height) {
  return top_down_camera(prior.world_position.x(), prior.world_position.y(),
                         stage2_height, prior.coarse_theta);
}

ReferenceEstimator::ReferenceEstimator(std::vector<PartSpec> catalog,
                                       CameraIntrinsics k)
    : ReferenceEstimator(std::move(catalog), k, Options{}) {}

ReferenceEstimator::ReferenceEstimator(std::vector<PartSpec> catalog,
                                       CameraIntrinsics k, Options opts)
    : catalog_(std::move(catalog)), k_(k), opts_(opts) {
  if (catalog_.empty()) {
    throw std::invalid_argument("ReferenceEstimator: empty catalog");
  }
}

void ReferenceEstimator::warm_up(const std::vector<double>& stage2_table_depths) {
  for (double depth : stage2_table_depths) {
    for (const PartSpec& part : catalog_) {
      stage2_grid(part.class_id, depth);
      class_signature(part.class_id, depth);
    }
  }
}

/// Renders the part alone at the given yaw, cropped to its detection box plus
/// working margin. The crop is a restricted-sensor render: same focal length,
/// shifted principal point.
ReferenceEstimator::Template ReferenceEstimator::render_template(
    const PartSpec& part, double angle_deg, double table_depth,
    double blur_sigma) const {
  const double side = fixed_bbox_px(part, k_, table_depth);
  const int pad = 20;
  const int half = static_cast<int>(std::ceil(side / 2.0)) + pad;
  const int center_u = static_cast<int>(std::lround(k_.cx));
  const int center_v = static_cast<int>(std::lround(k_.cy));
  const int u0 = center_u - half;
  const int v0 = center_v - half;

  CameraIntrinsics crop_k = k_;
  crop_k.width = 2 * half + 1;
  crop_k.height = 2 * half + 1;
  crop_k.cx = k_.cx - u0;
  crop_k.cy = k_.cy - v0;

  Scene scene;
  scene.table_depth = table_depth;
  scene.placements.push_back(
      Placement{part.class_id, PlanarPose::make(0.0, 0.0, angle_deg)});
  const RigidTransform cam = top_down_camera(0.0, 0.0, table_depth, 0.0);

  Template t;
  t.angle_deg = angle_deg;
  t.origin_u = u0;
  t.origin_v = v0;
  t.crop = render(scene, catalog_, crop_k, cam);
  if (blur_sigma > 0.0) {
    t.crop = gaussian_blur(t.crop, blur_sigma);
  }

  const BoolGrid valid = BoolGrid::Constant(crop_k.height, crop_k.width, true);
  const BoolGrid fg = foreground_mask(t.crop, valid, table_depth,
                                      opts_.foreground_margin);
  int count = 0;
  const Eigen::ArrayXXi labels = label_components(fg, &count);
  if (count == 0) {
    throw std::runtime_error("render_template: part produced no foreground");
  }
  const auto regions = collect_components(labels, count);
  std::size_t biggest = 0;
  for (std::size_t i = 1; i < regions.size(); ++i) {
    if (regions[i].pixels.size() > regions[biggest].pixels.size()) biggest = i;
  }
  const Features feat =
      feature_pixels(regions[biggest], t.crop, valid, labels, table_depth,
                     opts_.foreground_margin, opts_.feature_height_fraction);
  const SurfaceStats stats = surface_stats(feat.pixels, t.crop, crop_k, cam);
  t.centroid_u = stats.centroid_px.x() + u0;
  t.centroid_v = stats.centroid_px.y() + v0;
  t.surface_centroid = stats.centroid_world;
  return t;
}

const ReferenceEstimator::TemplateGrid& ReferenceEstimator::stage2_grid(
    PartClass c, double table_depth) const {
  const auto key = std::make_pair(static_cast<int>(c),
                                  std::lround(table_depth * 1e4));
  auto it = grids_.find(key);
  if (it != grids_.end()) return it->second;

  const PartSpec& part = find_part(catalog_, c);
  TemplateGrid grid;
  grid.per_subclass =
      2 * static_cast<int>(std::lround(opts_.residual_range_deg /
                                       opts_.residual_step_deg)) + 1;
  for (int s = 0; s < part.subclass_count; ++s) {
    for (int i = 0; i < grid.per_subclass; ++i) {
      const double residual =
          -opts_.residual_range_deg + i * opts_.residual_step_deg;
      const double angle =
          normalize_degrees(s * part.angular_domain_deg + residual);
      grid.templates.push_back(
          render_template(part, angle, table_depth, opts_.template_blur_sigma));
    }
  }

  // Branch-disagreement pixels. All templates of a class share one crop
  // window, so templates at the same residual across branches compare
  // elementwise; away from the asymmetry feature they render identically.
  grid.distinct.resize(grid.templates.size());
  if (part.subclass_count > 1) {
    constexpr double kDistinctDepth = 0.0005;  // meters
    for (int s = 0; s < part.subclass_count; ++s) {
      for (int i = 0; i < grid.per_subclass; ++i) {
        const DepthImage& own =
            grid.templates[static_cast<std::size_t>(s * grid.per_subclass + i)]
                .crop;
        auto& pixels =
            grid.distinct[static_cast<std::size_t>(s * grid.per_subclass + i)];
        for (int v = 0; v < own.data.rows(); ++v) {
          for (int u = 0; u < own.data.cols(); ++u) {
            for (int o = 0; o < part.subclass_count; ++o) {
              if (o == s) continue;
              const DepthImage& other =
                  grid.templates[static_cast<std::size_t>(
                                     o * grid.per_subclass + i)]
                      .crop;
              if (std::abs(own.data(v, u) - other.data(v, u)) >
                  kDistinctDepth) {
                pixels.push_back({v, u});
                break;
              }
            }
          }
        }
      }
    }
  }
  return grids_.emplace(key, std::move(grid)).first->second;
}

const std::vector<ReferenceEstimator::Signature>&
ReferenceEstimator::class_signature(PartClass c, double table_depth) const {
  const auto key = std::make_pair(static_cast<int>(c),
                                  std::lround(table_depth * 1e4));
  auto it = signatures_.find(key);
  if (it != signatures_.end()) return it->second;

  // Features of a render at angle 0; rotation moves the signature far less
  // than the class-to-class gaps. The per-image blur draw is unknown, so the
  // family brackets the configured blur.
  std::vector<double> blurs;
  if (opts_.template_blur_sigma > 0.0) {
    blurs = {0.6 * opts_.template_blur_sigma, opts_.template_blur_sigma,
             1.4 * opts_.template_blur_sigma};
  } else {
    blurs = {0.0};
  }

  const PartSpec& part = find_part(catalog_, c);
  std::vector<Signature> family;
  for (double blur : blurs) {
    const Template t = render_template(part, 0.0, table_depth, blur);
    CameraIntrinsics crop_k = k_;
    crop_k.width = static_cast<int>(t.crop.data.cols());
    crop_k.height = static_cast<int>(t.crop.data.rows());
    crop_k.cx = k_.cx - t.origin_u;
    crop_k.cy = k_.cy - t.origin_v;
    const RigidTransform cam = top_down_camera(0.0, 0.0, table_depth, 0.0);

    const BoolGrid valid =
        BoolGrid::Constant(crop_k.height, crop_k.width, true);
    const BoolGrid fg = foreground_mask(t.crop, valid, table_depth,
                                        opts_.foreground_margin);
    int count = 0;
    const Eigen::ArrayXXi labels = label_components(fg, &count);
    const auto regions = collect_components(labels, count);
    std::size_t biggest = 0;
    for (std::size_t i = 1; i < regions.size(); ++i) {
      if (regions[i].pixels.size() > regions[biggest].pixels.size()) {
        biggest = i;
      }
    }
    const Features feat =
        feature_pixels(regions[biggest], t.crop, valid, labels, table_depth,
                       opts_.foreground_margin, opts_.feature_height_fraction);
    const SurfaceStats stats = surface_stats(feat.pixels, t.crop, crop_k, cam);
    family.push_back(Signature{stats.r_eq, stats.r_max});
  }
  return signatures_.emplace(key, std::move(family)).first->second;
}

std::vector<Detection> ReferenceEstimator::stage1(
    const NormalizedImage& img, const CameraIntrinsics& k,
    const RigidTransform& camera_pose, double table_depth) const {
  const DepthImage depth = denormalize(img, opts_.depth_min, opts_.depth_max);
  const BoolGrid valid = valid_mask(img);
  const BoolGrid fg =
      foreground_mask(depth, valid, table_depth, opts_.foreground_margin);
  int raw_count = 0;
  const Eigen::ArrayXXi raw_labels = label_components(fg, &raw_count);
  const BoolGrid opened = open_mask(fg);
  int comp_count = 0;
  const Eigen::ArrayXXi comp_labels = label_components(opened, &comp_count);
  const auto regions = collect_components(comp_labels, comp_count);

  std::vector<Detection> out;
  for (const PixelRegion& comp : regions) {
    if (static_cast<int>(comp.pixels.size()) < opts_.min_component_px) continue;
    const Features feat =
        feature_pixels(comp, depth, valid, raw_labels, table_depth,
                       opts_.foreground_margin, opts_.feature_height_fraction);
    if (feat.pixels.empty()) continue;
    const SurfaceStats stats = surface_stats(feat.pixels, depth, k, camera_pose);

    // Classification: nearest silhouette signature across each class's
    // blur family.
    PartClass best_class = PartClass::BasePlate;
    double best_residual = kInf;
    for (const PartSpec& part : catalog_) {
      double residual = kInf;
      for (const Signature& sig : class_signature(part.class_id, table_depth)) {
        residual = std::min(residual, std::abs(stats.r_eq - sig.r_eq) +
                                          std::abs(stats.r_max - sig.r_max));
      }
      if (residual < best_residual) {
        best_residual = residual;
        best_class = part.class_id;
      }
    }
    const PartSpec& part = find_part(catalog_, best_class);

    // Coarse angle: masked NCC against templates rendered at the detected
    // position (so perspective off the optical axis matches), coarse-to-fine
    // down to a 1 degree grid. Classes with near-symmetry branches score only
    // near-periodically, since the marker lines up just once per turn, so
    // their search spans the full circle and folds into the stage-1 domain at
    // the end; exactly symmetric classes need one domain.
    const double domain = part.angular_domain_deg;
    const double span = part.subclass_count > 1 ? 360.0 : domain;
    const double step1 = std::max(opts_.coarse_step_deg,
                                  std::floor(span / 90.0));
    std::vector<double> angles;
    for (double a = 0.0; a < span - 1e-9; a += step1) angles.push_back(a);

    const auto ncc_at = [&](double angle) {
      Scene scene;
      scene.table_depth = table_depth;
      scene.placements.push_back(Placement{
          best_class, PlanarPose::make(stats.centroid_world.x(),
                                       stats.centroid_world.y(), angle)});
      // Crop render around the projected part center.
      const Vec3 cam_pt =
          apply(invert(camera_pose),
                Vec3(stats.centroid_world.x(), stats.centroid_world.y(), 0.0));
      const Vec2 center = project(cam_pt, k);
      const double side = fixed_bbox_px(part, k, table_depth);
      const int half = static_cast<int>(std::ceil(side / 2.0)) + 12;
      const int u0 = static_cast<int>(std::lround(center.x())) - half;
      const int v0 = static_cast<int>(std::lround(center.y())) - half;
      CameraIntrinsics crop_k = k;
      crop_k.width = 2 * half + 1;
      crop_k.height = 2 * half + 1;
      crop_k.cx = k.cx - u0;
      crop_k.cy = k.cy - v0;
      const DepthImage tmpl = render(scene, catalog_, crop_k, camera_pose);

      // The template's foreground centroid and the observed centroid align
      // the comparison window; silhouette centroids need not coincide with
      // the part origin.
      double tcu = 0.0, tcv = 0.0;
      int tn = 0;
      for (int v = 0; v < crop_k.height; ++v) {
        for (int u = 0; u < crop_k.width; ++u) {
          if (tmpl.data(v, u) < table_depth - opts_.foreground_margin) {
            tcu += u;
            tcv += v;
            ++tn;
          }
        }
      }
      if (tn == 0) return -1.0;
      tcu /= tn;
      tcv /= tn;
      const int shift_u = static_cast<int>(
          std::lround(stats.centroid_px.x() - (tcu + u0)));
      const int shift_v = static_cast<int>(
          std::lround(stats.centroid_px.y() - (tcv + v0)));

      std::vector<double> ps, ts;
      for (int v = 0; v < crop_k.height; ++v) {
        for (int u = 0; u < crop_k.width; ++u) {
          const double td = tmpl.data(v, u);
          if (td >= table_depth - opts_.foreground_margin) continue;
          const int ou = u + u0 + shift_u;
          const int ov = v + v0 + shift_v;
          double od = table_depth;
          if (ou >= 0 && ou < k.width && ov >= 0 && ov < k.height &&
              valid(ov, ou)) {
            od = depth.data(ov, ou);
          }
          ps.push_back(od);
          ts.push_back(td);
        }
      }
      const double n = static_cast<double>(ps.size());
      double pm = 0.0, tm = 0.0;
      for (std::size_t i = 0; i < ps.size(); ++i) {
        pm += ps[i];
        tm += ts[i];
      }
      pm /= n;
      tm /= n;
      double num = 0.0, pd = 0.0, td2 = 0.0;
      for (std::size_t i = 0; i < ps.size(); ++i) {
        num += (ps[i] - pm) * (ts[i] - tm);
        pd += (ps[i] - pm) * (ps[i] - pm);
        td2 += (ts[i] - tm) * (ts[i] - tm);
      }
      if (pd <= 0.0 || td2 <= 0.0) return -1.0;
      return num / std::sqrt(pd * td2);
    };

    double best_angle = 0.0;
    double best_ncc = -2.0;
    for (double a : angles) {
      const double score = ncc_at(a);
      if (score > best_ncc) {
        best_ncc = score;
        best_angle = a;
      }
    }
    if (step1 > opts_.coarse_step_deg) {
      for (double a = best_angle - step1 + 1.0; a < best_angle + step1;
           a += opts_.coarse_step_deg) {
        const double wrapped = std::fmod(normalize_degrees(a), span);
        if (std::abs(wrapped - best_angle) < 1e-9) continue;
        const double score = ncc_at(wrapped);
        if (score > best_ncc) {
          best_ncc = score;
          best_angle = wrapped;
        }
      }
    }

    Detection d;
    d.class_id = best_class;
    d.score = std::exp(-best_residual / 0.005);
    d.coarse_theta = std::fmod(best_angle, domain);
    d.world_position = stats.centroid_world;
    const Vec3 cam_pt =
        apply(invert(camera_pose),
              Vec3(stats.centroid_world.x(), stats.centroid_world.y(), 0.0));
    const Vec2 center = project(cam_pt, k);
    const double side = fixed_bbox_px(part, k, table_depth);
    d.bbox = BBox{center.x(), center.y(), side, side};
    out.push_back(d);
  }
  return out;
}

RefinedPose ReferenceEstimator::stage2(const NormalizedImage& img,
                                       const CameraIntrinsics& k,
                                       const RigidTransform& camera_pose,
                                       const Detection& prior,
                                       const PartSpec& part,
                                       double table_depth) const {
  RefinedPose pose;
  pose.class_id = part.class_id;

  const DepthImage depth = denormalize(img, opts_.depth_min, opts_.depth_max);
  const BoolGrid valid = valid_mask(img);
  const BoolGrid fg =
      foreground_mask(depth, valid, table_depth, opts_.foreground_margin);
  int raw_count = 0;
  const Eigen::ArrayXXi raw_labels = label_components(fg, &raw_count);
  const BoolGrid opened = open_mask(fg);
  int comp_count = 0;
  const Eigen::ArrayXXi comp_labels = label_components(opened, &comp_count);
  const auto regions = collect_components(comp_labels, comp_count);

  // The prior centers the part, so take the component nearest image center.
  int best_region = -1;
  double best_dist = kInf;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (static_cast<int>(regions[i].pixels.size()) < opts_.min_component_px) {
      continue;
    }
    double cu = 0.0, cv = 0.0;
    for (const auto& [v, u] : regions[i].pixels) {
      cu += u;
      cv += v;
    }
    cu /= static_cast<double>(regions[i].pixels.size());
    cv /= static_cast<double>(regions[i].pixels.size());
    const double dist = std::hypot(cu - k.cx, cv - k.cy);
    if (dist < best_dist) {
      best_dist = dist;
      best_region = static_cast<int>(i);
    }
  }
  if (best_region < 0) {
    pose.status = RefineStatus::LostPart;
    return pose;
  }

  const Features feat = feature_pixels(
      regions[static_cast<std::size_t>(best_region)], depth, valid, raw_labels,
      table_depth, opts_.foreground_margin, opts_.feature_height_fraction);
  if (feat.pixels.empty()) {
    pose.status = RefineStatus::LostPart;
    return pose;
  }
  const SurfaceStats stats = surface_stats(feat.pixels, depth, k, camera_pose);

  const TemplateGrid& grid = stage2_grid(part.class_id, table_depth);
  std::vector<double> costs(grid.templates.size(), kInf);
  for (std::size_t i = 0; i < grid.templates.size(); ++i) {
    const Template& t = grid.templates[i];
    const int shift_u =
        static_cast<int>(std::lround(stats.centroid_px.x() - t.centroid_u));
    const int shift_v =
        static_cast<int>(std::lround(stats.centroid_px.y() - t.centroid_v));
    std::vector<double> diffs;
    diffs.reserve(static_cast<std::size_t>(t.crop.data.size()) / 4);
    for (int v = 0; v < t.crop.data.rows(); ++v) {
      for (int u = 0; u < t.crop.data.cols(); ++u) {
        const double td = t.crop.data(v, u);
        const int ou = u + t.origin_u + shift_u;
        const int ov = v + t.origin_v + shift_v;
        if (ou < 0 || ou >= k.width || ov < 0 || ov >= k.height) continue;
        if (!valid(ov, ou)) continue;
        const double od = depth.data(ov, ou);
        const bool fg_t = td < table_depth - opts_.foreground_margin;
        const bool fg_o = od < table_depth - opts_.foreground_margin;
        if (!fg_t && !fg_o) continue;
        diffs.push_back(std::abs(td - od));
      }
    }
    costs[i] = trimmed_mean(diffs, opts_.trim_fraction);
  }

  // Residual selection runs per branch over the full-silhouette cost; the
  // branch decision then runs on the disagreement pixels alone. Spreading the
  // branch decision over the whole silhouette would drown the asymmetry
  // feature, which covers a few percent of the part, in rim noise.
  std::vector<std::size_t> branch_best(
      static_cast<std::size_t>(part.subclass_count));
  for (int s = 0; s < part.subclass_count; ++s) {
    std::size_t b = static_cast<std::size_t>(s * grid.per_subclass);
    for (int i = 1; i < grid.per_subclass; ++i) {
      const std::size_t j = static_cast<std::size_t>(s * grid.per_subclass + i);
      if (costs[j] < costs[b]) b = j;
    }
    branch_best[static_cast<std::size_t>(s)] = b;
  }

  constexpr int kMinDistinctPx = 12;
  pose.subclass_costs.assign(static_cast<std::size_t>(part.subclass_count),
                             kInf);
  int weakest_region = std::numeric_limits<int>::max();
  for (int s = 0; s < part.subclass_count; ++s) {
    const std::size_t b = branch_best[static_cast<std::size_t>(s)];
    const Template& t = grid.templates[b];
    const int shift_u =
        static_cast<int>(std::lround(stats.centroid_px.x() - t.centroid_u));
    const int shift_v =
        static_cast<int>(std::lround(stats.centroid_px.y() - t.centroid_v));
    double sum = 0.0;
    int n = 0;
    for (const auto& [v, u] : grid.distinct[b]) {
      const int ou = u + t.origin_u + shift_u;
      const int ov = v + t.origin_v + shift_v;
      if (ou < 0 || ou >= k.width || ov < 0 || ov >= k.height) continue;
      if (!valid(ov, ou)) continue;
      const double diff = t.crop.data(v, u) - depth.data(ov, ou);
      // Squared error is the matched-filter statistic for choosing between
      // known depth patterns; an absolute-value cost would forfeit most of
      // the feature's margin to the noise floor.
      sum += diff * diff;
      ++n;
    }
    weakest_region = std::min(weakest_region, n);
    pose.subclass_costs[static_cast<std::size_t>(s)] = n > 0 ? sum / n : kInf;
  }
  if (weakest_region < kMinDistinctPx) {
    // Disagreement pixels are out of view (or the part has a single branch):
    // fall back to the full-silhouette grid costs for every branch so the
    // comparison stays in one unit.
    for (int s = 0; s < part.subclass_count; ++s) {
      pose.subclass_costs[static_cast<std::size_t>(s)] =
          costs[branch_best[static_cast<std::size_t>(s)]];
    }
  }

  std::size_t sub_best = 0;
  for (std::size_t s = 1; s < pose.subclass_costs.size(); ++s) {
    if (pose.subclass_costs[s] < pose.subclass_costs[sub_best]) sub_best = s;
  }
  const int sub = static_cast<int>(sub_best);
  const std::size_t best = branch_best[sub_best];
  const int idx = static_cast<int>(best) % grid.per_subclass;
  double residual = -opts_.residual_range_deg + idx * opts_.residual_step_deg;

  // Quadratic refinement over the three neighboring grid scores.
  if (idx > 0 && idx + 1 < grid.per_subclass) {
    const double cm = costs[best - 1];
    const double c0 = costs[best];
    const double cp = costs[best + 1];
    const double denom = cm - 2.0 * c0 + cp;
    if (std::isfinite(cm) && std::isfinite(cp) && denom > 1e-18) {
      residual += 0.5 * opts_.residual_step_deg * (cm - cp) / denom;
      residual = std::clamp(residual, -opts_.residual_range_deg,
                            opts_.residual_range_deg);
    }
  }

  const Template& t_best = grid.templates[best];
  pose.subclass = sub;
  pose.residual_dtheta = residual;
  pose.final_theta = normalize_degrees(
      prior.coarse_theta + sub * part.angular_domain_deg + residual);
  pose.position =
      stats.centroid_world - rotate_deg(t_best.surface_centroid,
                                        prior.coarse_theta);
  pose.score = std::exp(-costs[best] / 0.002);

  const Vec3 cam_pt = apply(invert(camera_pose),
                            Vec3(pose.position.x(), pose.position.y(), 0.0));
  const Vec2 center = project(cam_pt, k);
  const double side = fixed_bbox_px(part, k, table_depth);
  pose.bbox = BBox{center.x(), center.y(), side, side};
  return pose;
}

std::vector<Vec2> view_grid_centers(double workspace_x, double workspace_y,
                                    const CameraIntrinsics& k, double height,
                                    double overlap_fraction) {
  if (workspace_x <= 0.0 || workspace_y <= 0.0) {
    throw std::invalid_argument("view_grid_centers: workspace must be positive");
  }
  const double footprint_x = (k.width - 1) * height / k.fx;
  const double footprint_y = (k.height - 1) * height / k.fy;
  const double step_x = footprint_x * (1.0 - overlap_fraction);
  const double step_y = footprint_y * (1.0 - overlap_fraction);
  std::vector<Vec2> centers;
  for (int iy = -1; iy <= 1; ++iy) {
    for (int ix = -1; ix <= 1; ++ix) {
      centers.push_back(Vec2(ix * step_x, iy * step_y));
    }
  }
  return centers;
}

EstimateResult estimate_all(const ViewSet& views, const Scene& true_scene,
                            const std::vector<PartSpec>& catalog,
                            const EstimatorInterface& estimator,
                            const EstimateOptions& opts) {
  if (views.images.size() != views.cameras.size()) {
    throw std::invalid_argument("estimate_all: image/camera count mismatch");
  }
  EstimateResult result;
  std::vector<Detection> all;
  for (std::size_t i = 0; i < views.images.size(); ++i) {
    std::vector<Detection> dets = estimator.stage1(
        views.images[i], views.k, views.cameras[i], views.table_depth);
    for (Detection& d : dets) {
      d.source_view = static_cast<int>(i);
      all.push_back(d);
    }
  }

  FilterConfig fcfg = opts.filter;
  if (fcfg.image_width <= 0) fcfg.image_width = views.k.width;
  if (fcfg.image_height <= 0) fcfg.image_height = views.k.height;
  result.detections = filter_detections(std::move(all), fcfg);

  const SensorNoiseConfig noise =
      opts.noise_enabled ? opts.noise : SensorNoiseConfig::noiseless();
  for (std::size_t i = 0; i < result.detections.size(); ++i) {
    const Detection& prior = result.detections[i];
    const PartSpec& part = find_part(catalog, prior.class_id);
    const RigidTransform cam2 = canonical_camera_pose(prior, opts.stage2_height);
    Scene closeup = true_scene;
    closeup.table_depth = opts.stage2_height;
    const DepthImage depth2 = render(closeup, catalog, views.k, cam2);
    const NormalizedImage img2 = degrade(
        depth2, noise,
        derive_seed(opts.closeup_seed, {static_cast<std::uint64_t>(i)}));
    result.poses.push_back(estimator.stage2(img2, views.k, cam2, prior, part,
                                            opts.stage2_height));
  }
  return result;
}

}  // namespace gearpose
