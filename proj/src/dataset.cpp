#include "gearpose/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "gearpose/rng.hpp"

namespace gearpose {

namespace {

using nlohmann::json;

// Seed derivation tags; each independent stream gets its own branch of the
// master seed.
constexpr std::uint64_t kTagSceneDraw = 1;
constexpr std::uint64_t kTagSceneNoise = 2;
constexpr std::uint64_t kTagCountBlock = 3;
constexpr std::uint64_t kTagClassRound = 4;
constexpr std::uint64_t kTagStage2Draw = 5;
constexpr std::uint64_t kTagStage2Noise = 6;

// Part counts per scene, shuffled in blocks of ten. The multiset sums to 32,
// so every block of ten scenes averages exactly 3.2 parts.
constexpr std::array<int, 10> kSceneCounts = {1, 2, 3, 4, 5, 3, 4, 3, 4, 3};

constexpr double kEdgePadPx = 4.0;

std::array<int, 10> count_block(std::uint64_t master, int block) {
  std::vector<int> counts(kSceneCounts.begin(), kSceneCounts.end());
  Rng rng(derive_seed(master, {kTagCountBlock, static_cast<std::uint64_t>(block)}));
  shuffle(counts, rng);
  std::array<int, 10> out{};
  std::copy(counts.begin(), counts.end(), out.begin());
  return out;
}

int parts_in_scene(std::uint64_t master, int index) {
  return count_block(master, index / 10)[static_cast<std::size_t>(index % 10)];
}

/// Number of class-stream positions consumed by scenes before this one.
std::int64_t class_stream_offset(std::uint64_t master, int index) {
  std::int64_t offset = 32 * (index / 10);
  const auto block = count_block(master, index / 10);
  for (int i = 0; i < index % 10; ++i) offset += block[static_cast<std::size_t>(i)];
  return offset;
}

std::array<int, kPartClassCount> class_round(std::uint64_t master,
                                             std::int64_t round) {
  std::vector<int> order(kPartClassCount);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(master, {kTagClassRound, static_cast<std::uint64_t>(round)}));
  shuffle(order, rng);
  std::array<int, kPartClassCount> out{};
  std::copy(order.begin(), order.end(), out.begin());
  return out;
}

/// Classes for one scene: consecutive entries of the cycled class rounds.
/// A scene spanning a round boundary can draw a duplicate; the duplicate is
/// replaced by the next unused class within its own round, so the scene stays
/// duplicate-free while consuming exactly `count` stream positions.
std::vector<PartClass> classes_for_scene(std::uint64_t master, int index,
                                         int count) {
  const std::int64_t base = class_stream_offset(master, index);
  std::vector<int> chosen;
  chosen.reserve(static_cast<std::size_t>(count));
  for (int t = 0; t < count; ++t) {
    const std::int64_t pos = base + t;
    const auto round = class_round(master, pos / kPartClassCount);
    int idx = static_cast<int>(pos % kPartClassCount);
    int c = round[static_cast<std::size_t>(idx)];
    while (std::find(chosen.begin(), chosen.end(), c) != chosen.end()) {
      idx = (idx + 1) % kPartClassCount;
      c = round[static_cast<std::size_t>(idx)];
    }
    chosen.push_back(c);
  }
  std::vector<PartClass> out;
  out.reserve(chosen.size());
  for (int c : chosen) out.push_back(static_cast<PartClass>(c));
  return out;
}

/// Largest |x| a part center may take so its fixed detection box stays
/// kEdgePadPx inside the image.
double placement_half_extent(const GenConfig& cfg, const PartSpec& part,
                             const CameraIntrinsics& k, double height,
                             bool x_axis) {
  const double workspace = x_axis ? cfg.workspace_x : cfg.workspace_y;
  if (workspace > 0.0) {
    const double half = workspace / 2.0 - part.bounding_radius;
    if (half <= 0.0) {
      throw std::invalid_argument("GenConfig: workspace smaller than part");
    }
    return half;
  }
  const double img_half = ((x_axis ? k.width : k.height) - 1) / 2.0;
  const double px = img_half - fixed_bbox_px(part, k, height) / 2.0 - kEdgePadPx;
  if (px <= 0.0) {
    throw std::invalid_argument("GenConfig: image too small for part box");
  }
  const double f = x_axis ? k.fx : k.fy;
  return px * height / f;
}

BBox label_bbox(const PartSpec& part, const PlanarPose& pose,
                const CameraIntrinsics& k, const RigidTransform& camera_pose,
                double height) {
  const Vec3 cam_pt = apply(invert(camera_pose), Vec3(pose.x, pose.y, 0.0));
  const Vec2 px = project(cam_pt, k);
  const double side = fixed_bbox_px(part, k, height);
  return BBox{px.x(), px.y(), side, side};
}

json bbox_to_json(const BBox& b) {
  return json{{"center_u", b.center_u},
              {"center_v", b.center_v},
              {"width", b.width},
              {"height", b.height}};
}

BBox bbox_from_json(const json& j) {
  return BBox{j.at("center_u").get<double>(), j.at("center_v").get<double>(),
              j.at("width").get<double>(), j.at("height").get<double>()};
}

json pose_to_json(const PlanarPose& p) {
  return json{{"x", p.x}, {"y", p.y}, {"theta_deg", p.theta_deg}};
}

PlanarPose pose_from_json(const json& j) {
  return PlanarPose::make(j.at("x").get<double>(), j.at("y").get<double>(),
                          j.at("theta_deg").get<double>());
}

json camera_to_json(const RigidTransform& T) {
  // Top-down cameras round-trip through (x, y, height, yaw); anything else
  // would need the full matrix and never occurs in datasets.
  const double yaw = rad_to_deg(std::atan2(T.R(1, 0), T.R(0, 0)));
  return json{{"x", T.t.x()},
              {"y", T.t.y()},
              {"height", T.t.z()},
              {"yaw_deg", normalize_degrees(yaw)}};
}

RigidTransform camera_from_json(const json& j) {
  return top_down_camera(j.at("x").get<double>(), j.at("y").get<double>(),
                         j.at("height").get<double>(),
                         j.at("yaw_deg").get<double>());
}

json scene_to_json(const Scene& s) {
  json placements = json::array();
  for (const Placement& p : s.placements) {
    placements.push_back(json{{"class_id", std::string(to_string(p.class_id))},
                              {"pose", pose_to_json(p.pose)}});
  }
  return json{{"table_depth", s.table_depth}, {"placements", placements}};
}

Scene scene_from_json(const json& j) {
  Scene s;
  s.table_depth = j.at("table_depth").get<double>();
  for (const json& p : j.at("placements")) {
    s.placements.push_back(
        Placement{part_class_from_string(p.at("class_id").get<std::string>()),
                  pose_from_json(p.at("pose"))});
  }
  return s;
}

std::string record_name(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%06d.json", prefix, index);
  return buf;
}

std::string image_name(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%06d.pgm", prefix, index);
  return buf;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  out << j.dump(2) << '\n';
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open: " + path.string());
  }
  return json::parse(in);
}

}  // namespace

CanonicalAngle canonical_angle(double theta_deg, const PartSpec& part) {
  const double theta = normalize_degrees(theta_deg);
  const double domain = part.angular_domain_deg;
  CanonicalAngle a;
  a.residual_deg = std::fmod(theta, domain);
  a.subclass = static_cast<int>(std::floor(theta / domain)) % part.subclass_count;
  return a;
}

std::pair<double, double> encode_orientation(double theta_deg, int n_eff) {
  if (n_eff <= 0) {
    throw std::invalid_argument("encode_orientation: n_eff must be positive");
  }
  const double a =
      normalize_degrees(std::fmod(n_eff * normalize_degrees(theta_deg), 360.0));
  return {std::sin(deg_to_rad(a)), std::cos(deg_to_rad(a))};
}

double decode_orientation(double sin_n_theta, double cos_n_theta, int n_eff) {
  if (n_eff <= 0) {
    throw std::invalid_argument("decode_orientation: n_eff must be positive");
  }
  if (std::hypot(sin_n_theta, cos_n_theta) < 0.1) {
    throw std::invalid_argument("decode_orientation: degenerate pair");
  }
  double a = rad_to_deg(std::atan2(sin_n_theta, cos_n_theta));
  if (a < 0.0) a += 360.0;
  return a / n_eff;
}

CameraIntrinsics default_intrinsics() {
  return intrinsics_from_hfov(640, 480, 65.0);
}

CameraIntrinsics effective_intrinsics(const GenConfig& cfg) {
  return cfg.intrinsics.width > 0 ? cfg.intrinsics : default_intrinsics();
}

SensorNoiseConfig effective_noise(const GenConfig& cfg) {
  return cfg.noise_enabled ? cfg.noise : SensorNoiseConfig::noiseless();
}

Stage1Sample stage1_sample_at(const GenConfig& cfg,
                              const std::vector<PartSpec>& catalog,
                              int index) {
  if (index < 0) {
    throw std::invalid_argument("stage1_sample_at: negative index");
  }
  const CameraIntrinsics k = effective_intrinsics(cfg);
  const double height = cfg.stage1_height;
  const auto classes =
      classes_for_scene(cfg.master_seed, index, parts_in_scene(cfg.master_seed, index));

  Stage1Sample s;
  s.index = index;
  s.scene.table_depth = height;
  s.camera_pose = top_down_camera(0.0, 0.0, height);
  s.noise_seed = derive_seed(cfg.master_seed,
                             {kTagSceneNoise, static_cast<std::uint64_t>(index)});

  Rng rng(derive_seed(cfg.master_seed,
                      {kTagSceneDraw, static_cast<std::uint64_t>(index)}));
  for (PartClass c : classes) {
    const PartSpec& part = find_part(catalog, c);
    const double xh = placement_half_extent(cfg, part, k, height, true);
    const double yh = placement_half_extent(cfg, part, k, height, false);
    bool placed = false;
    for (int attempt = 0; attempt < cfg.placement_attempts; ++attempt) {
      const double x = rng.uniform(-xh, xh);
      const double y = rng.uniform(-yh, yh);
      const double theta = rng.uniform(0.0, 360.0);
      bool clear = true;
      for (const Placement& other : s.scene.placements) {
        const PartSpec& op = find_part(catalog, other.class_id);
        const double min_dist =
            part.bounding_radius + op.bounding_radius + cfg.placement_margin;
        if (std::hypot(x - other.pose.x, y - other.pose.y) <= min_dist) {
          clear = false;
          break;
        }
      }
      if (clear) {
        s.scene.placements.push_back(Placement{c, PlanarPose::make(x, y, theta)});
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw std::runtime_error("stage1_sample_at: placement attempts exhausted "
                               "for scene " + std::to_string(index));
    }
  }

  for (const Placement& p : s.scene.placements) {
    const PartSpec& part = find_part(catalog, p.class_id);
    Stage1Label label;
    label.class_id = p.class_id;
    label.bbox = label_bbox(part, p.pose, k, s.camera_pose, height);
    const auto [sn, cn] =
        encode_orientation(p.pose.theta_deg, effective_stage1_order(part));
    label.sin_n_theta = sn;
    label.cos_n_theta = cn;
    s.labels.push_back(label);
  }
  return s;
}

Stage2Sample stage2_sample_at(const GenConfig& cfg, const PartSpec& part,
                              int subclass, int index) {
  if (index < 0) {
    throw std::invalid_argument("stage2_sample_at: negative index");
  }
  if (subclass < 0 || subclass >= part.subclass_count) {
    throw std::invalid_argument("stage2_sample_at: subclass out of range");
  }
  const CameraIntrinsics k = effective_intrinsics(cfg);
  const double height = cfg.stage2_height;
  const double domain = part.angular_domain_deg;

  Rng rng(derive_seed(cfg.master_seed,
                      {kTagStage2Draw, static_cast<std::uint64_t>(part.class_id),
                       static_cast<std::uint64_t>(subclass),
                       static_cast<std::uint64_t>(index)}));
  // The coarse estimate the close-up view is centered on: the in-branch
  // residual only. The camera must not absorb the branch offset, otherwise
  // every branch would look identical in the canonical view.
  const double coarse = rng.uniform(0.0, domain);
  const double theta_u = subclass * domain + coarse;
  const double x = rng.uniform(-0.05, 0.05);
  const double y = rng.uniform(-0.05, 0.05);
  const double dx = rng.uniform(-cfg.perturb_xy, cfg.perturb_xy);
  const double dy = rng.uniform(-cfg.perturb_xy, cfg.perturb_xy);
  const double dtheta = rng.uniform(-cfg.perturb_theta, cfg.perturb_theta);

  Stage2Sample s;
  s.index = index;
  s.class_id = part.class_id;
  s.scene.table_depth = height;
  s.scene.placements.push_back(Placement{
      part.class_id, PlanarPose::make(x + dx, y + dy, theta_u + dtheta)});
  s.camera_pose = top_down_camera(x, y, height, coarse);
  s.label.subclass = subclass;
  s.label.residual_dtheta = dtheta;
  s.label.perturbed_bbox = label_bbox(part, s.scene.placements[0].pose, k,
                                      s.camera_pose, height);
  s.label.true_planar_pose = s.scene.placements[0].pose;
  s.noise_seed = derive_seed(cfg.master_seed,
                             {kTagStage2Noise, static_cast<std::uint64_t>(part.class_id),
                              static_cast<std::uint64_t>(subclass),
                              static_cast<std::uint64_t>(index)});
  return s;
}

NormalizedImage render_sample_image(const GenConfig& cfg,
                                    const std::vector<PartSpec>& catalog,
                                    const Scene& scene,
                                    const RigidTransform& camera_pose,
                                    std::uint64_t noise_seed) {
  const DepthImage depth =
      render(scene, catalog, effective_intrinsics(cfg), camera_pose);
  return degrade(depth, effective_noise(cfg), noise_seed);
}

void write_stage1_dataset(const std::filesystem::path& dir,
                          const GenConfig& cfg,
                          const std::vector<PartSpec>& catalog, int count,
                          bool with_images, const std::string& config_hash) {
  if (count <= 0) {
    throw std::invalid_argument("write_stage1_dataset: count must be positive");
  }
  std::filesystem::create_directories(dir / "scenes");
  if (with_images) std::filesystem::create_directories(dir / "images");

  for (int i = 0; i < count; ++i) {
    const Stage1Sample s = stage1_sample_at(cfg, catalog, i);
    json labels = json::array();
    for (const Stage1Label& l : s.labels) {
      labels.push_back(json{{"class_id", std::string(to_string(l.class_id))},
                            {"bbox", bbox_to_json(l.bbox)},
                            {"orientation_pair",
                             json{{"sin_n_theta", l.sin_n_theta},
                                  {"cos_n_theta", l.cos_n_theta}}}});
    }
    json record{{"scene_index", i},
                {"camera", camera_to_json(s.camera_pose)},
                {"scene", scene_to_json(s.scene)},
                {"labels", labels},
                {"noise_seed", s.noise_seed}};
    write_json_file(dir / "scenes" / record_name("scene", i), record);
    if (with_images) {
      const NormalizedImage img = render_sample_image(
          cfg, catalog, s.scene, s.camera_pose, s.noise_seed);
      write_pgm8(dir / "images" / image_name("scene", i), img);
    }
  }

  const CameraIntrinsics k = effective_intrinsics(cfg);
  json manifest{{"split", "stage1"},
                {"count", count},
                {"master_seed", cfg.master_seed},
                {"table_depth", cfg.stage1_height},
                {"workspace_x", cfg.workspace_x},
                {"workspace_y", cfg.workspace_y},
                {"noise_enabled", cfg.noise_enabled},
                {"with_images", with_images},
                {"config_hash", config_hash},
                {"camera",
                 json{{"fx", k.fx},
                      {"fy", k.fy},
                      {"cx", k.cx},
                      {"cy", k.cy},
                      {"width", k.width},
                      {"height", k.height}}}};
  write_json_file(dir / "manifest.json", manifest);
}

void write_stage2_dataset(const std::filesystem::path& dir,
                          const GenConfig& cfg,
                          const std::vector<PartSpec>& catalog, PartClass part,
                          int subclass, int count, bool with_images,
                          const std::string& config_hash) {
  if (count <= 0) {
    throw std::invalid_argument("write_stage2_dataset: count must be positive");
  }
  const PartSpec& spec = find_part(catalog, part);
  std::filesystem::create_directories(dir / "samples");
  if (with_images) std::filesystem::create_directories(dir / "images");

  for (int i = 0; i < count; ++i) {
    const Stage2Sample s = stage2_sample_at(cfg, spec, subclass, i);
    json record{{"sample_index", i},
                {"class_id", std::string(to_string(part))},
                {"camera", camera_to_json(s.camera_pose)},
                {"scene", scene_to_json(s.scene)},
                {"label",
                 json{{"subclass", s.label.subclass},
                      {"residual_dtheta", s.label.residual_dtheta},
                      {"perturbed_bbox", bbox_to_json(s.label.perturbed_bbox)},
                      {"true_planar_pose",
                       pose_to_json(s.label.true_planar_pose)}}},
                {"noise_seed", s.noise_seed}};
    write_json_file(dir / "samples" / record_name("sample", i), record);
    if (with_images) {
      const NormalizedImage img = render_sample_image(
          cfg, catalog, s.scene, s.camera_pose, s.noise_seed);
      write_pgm8(dir / "images" / image_name("sample", i), img);
    }
  }

  json manifest{{"split", "stage2"},
                {"count", count},
                {"master_seed", cfg.master_seed},
                {"table_depth", cfg.stage2_height},
                {"part", std::string(to_string(part))},
                {"subclass", subclass},
                {"noise_enabled", cfg.noise_enabled},
                {"with_images", with_images},
                {"config_hash", config_hash}};
  write_json_file(dir / "manifest.json", manifest);
}

DatasetInfo read_dataset_info(const std::filesystem::path& dir) {
  const json m = read_json_file(dir / "manifest.json");
  DatasetInfo info;
  info.split = m.at("split").get<std::string>();
  info.count = m.at("count").get<int>();
  info.master_seed = m.at("master_seed").get<std::uint64_t>();
  info.table_depth = m.at("table_depth").get<double>();
  info.noise_enabled = m.at("noise_enabled").get<bool>();
  if (info.split == "stage1") {
    info.workspace_x = m.at("workspace_x").get<double>();
    info.workspace_y = m.at("workspace_y").get<double>();
  } else if (info.split == "stage2") {
    info.part = part_class_from_string(m.at("part").get<std::string>());
    info.subclass = m.at("subclass").get<int>();
  } else {
    throw std::runtime_error("read_dataset_info: unknown split '" +
                             info.split + "'");
  }
  return info;
}

Stage1Sample read_stage1_record(const std::filesystem::path& dir, int index) {
  const json r = read_json_file(dir / "scenes" / record_name("scene", index));
  Stage1Sample s;
  s.index = r.at("scene_index").get<int>();
  s.camera_pose = camera_from_json(r.at("camera"));
  s.scene = scene_from_json(r.at("scene"));
  s.noise_seed = r.at("noise_seed").get<std::uint64_t>();
  for (const json& l : r.at("labels")) {
    Stage1Label label;
    label.class_id = part_class_from_string(l.at("class_id").get<std::string>());
    label.bbox = bbox_from_json(l.at("bbox"));
    label.sin_n_theta = l.at("orientation_pair").at("sin_n_theta").get<double>();
    label.cos_n_theta = l.at("orientation_pair").at("cos_n_theta").get<double>();
    s.labels.push_back(label);
  }
  return s;
}

Stage2Sample read_stage2_record(const std::filesystem::path& dir, int index,
                                const std::vector<PartSpec>& catalog) {
  const json r = read_json_file(dir / "samples" / record_name("sample", index));
  Stage2Sample s;
  s.index = r.at("sample_index").get<int>();
  s.class_id = part_class_from_string(r.at("class_id").get<std::string>());
  s.camera_pose = camera_from_json(r.at("camera"));
  s.scene = scene_from_json(r.at("scene"));
  s.noise_seed = r.at("noise_seed").get<std::uint64_t>();
  const json& l = r.at("label");
  s.label.subclass = l.at("subclass").get<int>();
  s.label.residual_dtheta = l.at("residual_dtheta").get<double>();
  s.label.perturbed_bbox = bbox_from_json(l.at("perturbed_bbox"));
  s.label.true_planar_pose = pose_from_json(l.at("true_planar_pose"));
  find_part(catalog, s.class_id);  // validates the class exists
  return s;
}

}  // namespace gearpose
