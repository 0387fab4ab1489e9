#include "gearpose/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gearpose/assembly.hpp"
#include "gearpose/catalog.hpp"
#include "gearpose/config.hpp"
#include "gearpose/dataset.hpp"
#include "gearpose/metrics.hpp"
#include "gearpose/pipeline.hpp"
#include "gearpose/render.hpp"
#include "gearpose/sensor.hpp"
#include "gearpose/version.hpp"

namespace gearpose {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitInput = 4;
constexpr int kExitRuntime = 5;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void emit_error_record(const std::string& kind, int code,
                       const std::string& message) {
  const json j{{"error",
                json{{"kind", kind}, {"code", code}, {"message", message}}}};
  std::cerr << j.dump() << "\n";
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open: " + path.string());
  json j;
  in >> j;
  return j;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write: " + path.string());
}

void write_run_manifest(const fs::path& dir, const std::string& command,
                        std::uint64_t seed, const std::string& config_hash) {
  write_json_file(dir / "run_manifest.json",
                  json{{"command", command},
                       {"version", std::string(kVersion)},
                       {"seed", seed},
                       {"config_hash", config_hash}});
}

std::string indexed_name(const char* stem, int index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%06d.%s", stem, index, ext);
  return buf;
}

ConfigFile load_config(const std::string& path) {
  if (path.empty()) return ConfigFile{};
  if (!fs::exists(path)) throw ConfigError("cannot open config: " + path);
  try {
    return ConfigFile::parse_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

SensorNoiseConfig noise_from_config(const ConfigFile& cfg) {
  SensorNoiseConfig n;
  n.noise_sigma_min = cfg.get_double("noise.sigma_min", n.noise_sigma_min);
  n.noise_sigma_max = cfg.get_double("noise.sigma_max", n.noise_sigma_max);
  n.blur_sigma_min = cfg.get_double("noise.blur_min", n.blur_sigma_min);
  n.blur_sigma_max = cfg.get_double("noise.blur_max", n.blur_sigma_max);
  n.depth_min = cfg.get_double("noise.depth_min", n.depth_min);
  n.depth_max = cfg.get_double("noise.depth_max", n.depth_max);
  n.dropout_enabled = cfg.get_bool("noise.dropout_enabled", n.dropout_enabled);
  n.dropout_gradient_threshold = cfg.get_double(
      "noise.dropout_threshold", n.dropout_gradient_threshold);
  return n;
}

GenConfig gen_config_from(const ConfigFile& cfg) {
  GenConfig g;
  g.master_seed = cfg.get_u64("dataset.seed", g.master_seed);
  g.stage1_height = cfg.get_double("dataset.stage1_height", g.stage1_height);
  g.stage2_height = cfg.get_double("dataset.stage2_height", g.stage2_height);
  g.placement_margin =
      cfg.get_double("dataset.placement_margin", g.placement_margin);
  g.placement_attempts =
      cfg.get_int("dataset.placement_attempts", g.placement_attempts);
  g.perturb_xy = cfg.get_double("dataset.perturb_xy", g.perturb_xy);
  g.perturb_theta = cfg.get_double("dataset.perturb_theta", g.perturb_theta);
  g.workspace_x = cfg.get_double("dataset.workspace_x", g.workspace_x);
  g.workspace_y = cfg.get_double("dataset.workspace_y", g.workspace_y);
  g.noise_enabled = cfg.get_bool("noise.enabled", g.noise_enabled);
  g.noise = noise_from_config(cfg);
  if (cfg.has("camera.width") || cfg.has("camera.height") ||
      cfg.has("camera.hfov_deg")) {
    g.intrinsics = intrinsics_from_hfov(cfg.get_int("camera.width", 640),
                                        cfg.get_int("camera.height", 480),
                                        cfg.get_double("camera.hfov_deg", 65.0));
  }
  return g;
}

std::vector<PartSpec> catalog_from_config(const ConfigFile& cfg) {
  return builtin_catalog(catalog_options_from(cfg));
}

ReferenceEstimator::Options estimator_options_from(const ConfigFile& cfg,
                                                   const SensorNoiseConfig& n) {
  ReferenceEstimator::Options o;
  o.depth_min = n.depth_min;
  o.depth_max = n.depth_max;
  o.foreground_margin =
      cfg.get_double("estimator.foreground_margin", o.foreground_margin);
  o.min_component_px =
      cfg.get_int("estimator.min_component_px", o.min_component_px);
  o.coarse_step_deg =
      cfg.get_double("estimator.coarse_step_deg", o.coarse_step_deg);
  o.trim_fraction = cfg.get_double("estimator.trim_fraction", o.trim_fraction);
  o.template_blur_sigma =
      cfg.get_double("estimator.template_blur_sigma", o.template_blur_sigma);
  return o;
}

CameraIntrinsics intrinsics_from_manifest(const json& manifest) {
  if (!manifest.contains("camera")) return default_intrinsics();
  const json& c = manifest.at("camera");
  CameraIntrinsics k;
  k.fx = c.at("fx").get<double>();
  k.fy = c.at("fy").get<double>();
  k.cx = c.at("cx").get<double>();
  k.cy = c.at("cy").get<double>();
  k.width = c.at("width").get<int>();
  k.height = c.at("height").get<int>();
  return k;
}

void require_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) {
    throw InputError("missing dataset manifest: " +
                     (dir / "manifest.json").string());
  }
}

json part_row_to_json(const PartRow& row) {
  json j{{"label", row.label},
         {"truth_count", row.truth_count},
         {"detected_count", row.detected_count},
         {"detection_rate", row.detection_rate},
         {"translation_mm_mean", row.translation_mm.mean},
         {"translation_mm_std", row.translation_mm.stddev},
         {"rotation_deg_mean", row.rotation_deg.mean},
         {"rotation_deg_std", row.rotation_deg.stddev}};
  j["isometry_accuracy"] =
      row.isometry_applicable ? json(row.isometry_accuracy) : json(nullptr);
  return j;
}

json report_to_json(const MetricsReport& report) {
  json parts = json::array();
  for (const PartRow& row : report.parts) parts.push_back(part_row_to_json(row));
  return json{{"parts", parts},
              {"average", part_row_to_json(report.average)},
              {"average_parts", part_row_to_json(report.average_parts)},
              {"average_pooled", part_row_to_json(report.average_pooled)}};
}

// --- gen ---

struct GenArgs {
  std::string out;
  std::string split = "stage1";
  std::string config_path;
  std::string part = "gear_1";
  int subclass = 0;
  int count = 100;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool with_images = false;
  bool noiseless = false;
};

int cmd_gen(const GenArgs& a) {
  const ConfigFile cfg = load_config(a.config_path);
  GenConfig g;
  std::vector<PartSpec> catalog;
  try {
    g = gen_config_from(cfg);
    catalog = catalog_from_config(cfg);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (a.seed_set) g.master_seed = a.seed;
  if (a.noiseless) g.noise_enabled = false;

  const fs::path out(a.out);
  fs::create_directories(out);
  const std::string hash = config_hash_hex(cfg);
  if (a.split == "stage1") {
    write_stage1_dataset(out, g, catalog, a.count, a.with_images, hash);
  } else {
    const PartClass part = part_class_from_string(a.part);
    write_stage2_dataset(out, g, catalog, part, a.subclass, a.count,
                         a.with_images, hash);
  }
  write_run_manifest(out, "gen", g.master_seed, hash);
  std::cout << "wrote " << a.count << " " << a.split << " records to "
            << out.string() << "\n";
  return 0;
}

// --- estimate ---

struct EstimateArgs {
  std::string dataset;
  std::string out;
  std::string config_path;
  int count = -1;  // -1 means the whole dataset
  double template_blur = -1.0;  // <0 means "from config"
};

NormalizedImage load_or_render_view(const fs::path& dir, const GenConfig& g,
                                    const std::vector<PartSpec>& catalog,
                                    const Stage1Sample& rec) {
  const fs::path img_path = dir / "images" / indexed_name("scene", rec.index, "pgm");
  if (fs::exists(img_path)) return read_pgm8(img_path);
  return render_sample_image(g, catalog, rec.scene, rec.camera_pose,
                             rec.noise_seed);
}

int cmd_estimate(const EstimateArgs& a) {
  const ConfigFile cfg = load_config(a.config_path);
  const fs::path dataset(a.dataset);
  require_dataset(dataset);
  const DatasetInfo info = read_dataset_info(dataset);
  if (info.split != "stage1") {
    throw InputError("estimate expects a stage1 dataset, got split '" +
                     info.split + "'");
  }
  const CameraIntrinsics k =
      intrinsics_from_manifest(read_json_file(dataset / "manifest.json"));

  std::vector<PartSpec> catalog;
  GenConfig g;
  ReferenceEstimator::Options eopts;
  double stage2_height = 0.31;
  try {
    catalog = catalog_from_config(cfg);
    g = gen_config_from(cfg);
    eopts = estimator_options_from(cfg, g.noise);
    stage2_height = cfg.get_double("dataset.stage2_height", stage2_height);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (a.template_blur >= 0.0) {
    eopts.template_blur_sigma = a.template_blur;
  } else if (info.noise_enabled && eopts.template_blur_sigma == 0.0) {
    // Match templates to the sensor's expected blur unless overridden.
    eopts.template_blur_sigma =
        0.5 * (g.noise.blur_sigma_min + g.noise.blur_sigma_max);
  }
  g.master_seed = info.master_seed;
  g.noise_enabled = info.noise_enabled;
  g.intrinsics = k;
  g.stage1_height = info.table_depth;

  const ReferenceEstimator estimator(catalog, k, eopts);
  const int count =
      a.count < 0 ? info.count : std::min(a.count, info.count);

  EstimateOptions eo;
  eo.stage2_height = stage2_height;
  eo.noise_enabled = info.noise_enabled;
  eo.noise = g.noise;

  json scenes = json::array();
  for (int i = 0; i < count; ++i) {
    const Stage1Sample rec = read_stage1_record(dataset, i);
    const NormalizedImage img = load_or_render_view(dataset, g, catalog, rec);
    ViewSet views;
    views.images = {img};
    views.cameras = {rec.camera_pose};
    views.k = k;
    views.table_depth = info.table_depth;
    eo.closeup_seed =
        derive_seed(info.master_seed, {9, static_cast<std::uint64_t>(i)});
    const EstimateResult res =
        estimate_all(views, rec.scene, catalog, estimator, eo);

    json detections = json::array();
    for (const Detection& d : res.detections) {
      detections.push_back(json{{"class", std::string(to_string(d.class_id))},
                                {"x_mm", d.world_position.x() * 1000.0},
                                {"y_mm", d.world_position.y() * 1000.0},
                                {"coarse_theta_deg", d.coarse_theta},
                                {"score", d.score},
                                {"view", d.source_view}});
    }
    json poses = json::array();
    for (const RefinedPose& p : res.poses) {
      if (p.status != RefineStatus::Ok) continue;
      poses.push_back(json{{"class", std::string(to_string(p.class_id))},
                           {"x_mm", p.position.x() * 1000.0},
                           {"y_mm", p.position.y() * 1000.0},
                           {"theta_deg", p.final_theta},
                           {"subclass", p.subclass},
                           {"score", p.score}});
    }
    scenes.push_back(json{{"scene_index", rec.index},
                          {"detections", detections},
                          {"poses", poses}});
  }

  const fs::path out(a.out);
  fs::create_directories(out);
  const std::string hash = config_hash_hex(cfg);
  write_json_file(out / "poses.json", json{{"dataset_split", info.split},
                                           {"count", count},
                                           {"scenes", scenes}});
  write_run_manifest(out, "estimate", info.master_seed, hash);
  std::cout << "estimated " << count << " scenes to " << out.string() << "\n";
  return 0;
}

// --- eval ---

struct EvalArgs {
  std::string dataset;
  std::string poses;
  std::string out;
  std::string config_path;
  double match_radius = 0.03;
};

int cmd_eval(const EvalArgs& a) {
  const ConfigFile cfg = load_config(a.config_path);
  const fs::path dataset(a.dataset);
  require_dataset(dataset);
  const DatasetInfo info = read_dataset_info(dataset);
  if (info.split != "stage1") {
    throw InputError("eval expects a stage1 dataset, got split '" +
                     info.split + "'");
  }
  if (!fs::exists(a.poses)) {
    throw InputError("missing poses file: " + a.poses);
  }
  std::vector<PartSpec> catalog;
  try {
    catalog = catalog_from_config(cfg);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }

  const json poses_doc = read_json_file(a.poses);
  std::vector<EvalSample> stage1_samples, stage2_samples;
  int scene_count = 0;
  for (const json& entry : poses_doc.at("scenes")) {
    const int index = entry.at("scene_index").get<int>();
    const Stage1Sample rec = read_stage1_record(dataset, index);
    ++scene_count;

    std::vector<Detection> detections;
    for (const json& d : entry.at("detections")) {
      Detection det;
      det.class_id = part_class_from_string(d.at("class").get<std::string>());
      det.world_position = Vec2(d.at("x_mm").get<double>() / 1000.0,
                                d.at("y_mm").get<double>() / 1000.0);
      det.coarse_theta = d.at("coarse_theta_deg").get<double>();
      det.score = d.at("score").get<double>();
      det.source_view = d.at("view").get<int>();
      detections.push_back(det);
    }
    std::vector<RefinedPose> poses;
    for (const json& p : entry.at("poses")) {
      RefinedPose pose;
      pose.class_id = part_class_from_string(p.at("class").get<std::string>());
      pose.position = Vec2(p.at("x_mm").get<double>() / 1000.0,
                           p.at("y_mm").get<double>() / 1000.0);
      pose.final_theta = p.at("theta_deg").get<double>();
      pose.subclass = p.at("subclass").get<int>();
      pose.score = p.at("score").get<double>();
      poses.push_back(pose);
    }

    const auto s1 =
        evaluate_stage1(rec.scene, catalog, detections, a.match_radius);
    const auto s2 = evaluate_stage2(rec.scene, catalog, poses, a.match_radius);
    stage1_samples.insert(stage1_samples.end(), s1.begin(), s1.end());
    stage2_samples.insert(stage2_samples.end(), s2.begin(), s2.end());
  }
  if (stage1_samples.empty()) {
    throw InputError("poses file covers no scenes with parts");
  }

  const MetricsReport r1 = aggregate(stage1_samples);
  const MetricsReport r2 = aggregate(stage2_samples);

  const fs::path out(a.out);
  fs::create_directories(out);
  write_json_file(out / "report.json",
                  json{{"scenes", scene_count},
                       {"match_radius_m", a.match_radius},
                       {"stage1", report_to_json(r1)},
                       {"stage2", report_to_json(r2)}});
  std::ofstream txt(out / "report.txt");
  txt << "Stage 1 (distal view)\n"
      << format_table(r1) << "\nStage 2 (canonical close-up)\n"
      << format_table(r2);
  if (!txt) throw std::runtime_error("cannot write report.txt");
  txt.close();
  write_run_manifest(out, "eval", info.master_seed, config_hash_hex(cfg));
  std::cout << "evaluated " << scene_count << " scenes to " << out.string()
            << "\n";
  return 0;
}

// --- assemble / lattice ---

struct LatticeArgs {
  std::string out;
  std::string config_path;
  double hole_radius = 0.0055;
  double peg_radius = 0.0050;
  double search_x = 0.010;
  double search_y = 0.010;
  double spacing = 0.0;  // 0 means the 2(R-r) default
};

struct AssembleArgs {
  LatticeArgs lattice;
  std::string error_model = "uniform";
  double error_scale = 0.002;
  int trials = 10000;
  std::uint64_t seed = 1;
  double coverage_step = 1e-4;
};

InsertionSpec insertion_from(const LatticeArgs& a, const ConfigFile& cfg) {
  InsertionSpec spec;
  try {
    spec.hole_radius = cfg.get_double("assembly.hole_radius", a.hole_radius);
    spec.peg_radius = cfg.get_double("assembly.peg_radius", a.peg_radius);
    spec.search_area_x = cfg.get_double("assembly.search_area_x", a.search_x);
    spec.search_area_y = cfg.get_double("assembly.search_area_y", a.search_y);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

std::optional<double> spacing_from(const LatticeArgs& a,
                                   const ConfigFile& cfg) {
  double spacing = a.spacing;
  try {
    spacing = cfg.get_double("assembly.spacing", spacing);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (spacing > 0.0) return spacing;
  return std::nullopt;
}

int cmd_lattice(const LatticeArgs& a) {
  const ConfigFile cfg = load_config(a.config_path);
  const InsertionSpec spec = insertion_from(a, cfg);
  const SearchLattice lattice = build_lattice(spec, spacing_from(a, cfg));

  const fs::path out(a.out);
  fs::create_directories(out);
  std::ofstream csv(out / "lattice.csv");
  for (const Vec2& o : lattice.offsets) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g\n", o.x() * 1000.0,
                  o.y() * 1000.0);
    csv << buf;
  }
  if (!csv) throw std::runtime_error("cannot write lattice.csv");
  csv.close();
  write_run_manifest(out, "lattice", 0, config_hash_hex(cfg));
  std::cout << "wrote " << lattice.offsets.size() << " offsets to "
            << (out / "lattice.csv").string() << "\n";
  return 0;
}

int cmd_assemble(const AssembleArgs& a) {
  const ConfigFile cfg = load_config(a.lattice.config_path);
  const InsertionSpec spec = insertion_from(a.lattice, cfg);
  const SearchLattice lattice = build_lattice(spec, spacing_from(a.lattice, cfg));

  std::string model_name = a.error_model;
  double scale = a.error_scale;
  int trials = a.trials;
  std::uint64_t seed = a.seed;
  double coverage_step = a.coverage_step;
  try {
    model_name = cfg.get_string("assembly.error_model", model_name);
    scale = cfg.get_double("assembly.error_scale", scale);
    trials = cfg.get_int("assembly.trials", trials);
    seed = cfg.get_u64("assembly.seed", seed);
    coverage_step = cfg.get_double("assembly.coverage_step", coverage_step);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }

  ErrorModel model;
  if (model_name == "uniform") {
    model = uniform_disk_error(scale);
  } else if (model_name == "gaussian") {
    model = gaussian_error(scale);
  } else {
    throw ConfigError("unknown error model '" + model_name +
                      "' (expected uniform or gaussian)");
  }

  const CampaignStats stats =
      run_assembly_campaign(model, spec, lattice, trials, seed);
  const double coverage = measure_coverage(spec, lattice, coverage_step);

  const fs::path out(a.lattice.out);
  fs::create_directories(out);
  write_json_file(
      out / "campaign.json",
      json{{"hole_radius_m", spec.hole_radius},
           {"peg_radius_m", spec.peg_radius},
           {"clearance_m", spec.hole_radius - spec.peg_radius},
           {"search_area_x_m", spec.search_area_x},
           {"search_area_y_m", spec.search_area_y},
           {"spacing_m", lattice.spacing},
           {"lattice_points", lattice.offsets.size()},
           {"coverage", coverage},
           {"error_model", model_name},
           {"error_scale_m", scale},
           {"trials", stats.trials},
           {"success_rate", stats.success_rate},
           {"feedback_rate", stats.feedback_rate},
           {"mean_attempts_when_invoked", stats.mean_attempts_when_invoked}});
  write_run_manifest(out, "assemble", seed, config_hash_hex(cfg));
  std::cout << "ran " << stats.trials << " trials, success rate "
            << stats.success_rate << ", report in " << out.string() << "\n";
  return 0;
}

// --- render ---

struct RenderArgs {
  std::string out;
  std::string dataset;
  std::string config_path;
  int index = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool noiseless = false;
};

int cmd_render(const RenderArgs& a) {
  const ConfigFile cfg = load_config(a.config_path);
  std::vector<PartSpec> catalog;
  GenConfig g;
  try {
    catalog = catalog_from_config(cfg);
    g = gen_config_from(cfg);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (a.seed_set) g.master_seed = a.seed;
  if (a.noiseless) g.noise_enabled = false;

  Scene scene;
  RigidTransform camera_pose;
  CameraIntrinsics k = effective_intrinsics(g);
  std::uint64_t noise_seed = 0;
  if (!a.dataset.empty()) {
    const fs::path dataset(a.dataset);
    require_dataset(dataset);
    const DatasetInfo info = read_dataset_info(dataset);
    if (a.index < 0 || a.index >= info.count) {
      throw InputError("record index " + std::to_string(a.index) +
                       " outside dataset of " + std::to_string(info.count));
    }
    if (info.split == "stage1") {
      k = intrinsics_from_manifest(read_json_file(dataset / "manifest.json"));
      const Stage1Sample rec = read_stage1_record(dataset, a.index);
      scene = rec.scene;
      camera_pose = rec.camera_pose;
      noise_seed = rec.noise_seed;
    } else {
      const Stage2Sample rec = read_stage2_record(dataset, a.index, catalog);
      scene = rec.scene;
      camera_pose = rec.camera_pose;
      noise_seed = rec.noise_seed;
    }
    if (!a.noiseless) g.noise_enabled = info.noise_enabled;
  } else {
    const Stage1Sample sample = stage1_sample_at(g, catalog, a.index);
    scene = sample.scene;
    camera_pose = sample.camera_pose;
    noise_seed = sample.noise_seed;
  }

  const DepthImage depth = render(scene, catalog, k, camera_pose);
  const SensorNoiseConfig noise =
      g.noise_enabled ? g.noise : SensorNoiseConfig::noiseless();
  const NormalizedImage view = degrade(depth, noise, noise_seed);

  const fs::path out(a.out);
  fs::create_directories(out);
  write_pgm16(out / "depth.pgm", depth);
  write_pgm8(out / "view.pgm", view);
  write_run_manifest(out, "render", g.master_seed, config_hash_hex(cfg));
  std::cout << "rendered to " << out.string() << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Synthetic depth toolkit: dataset generation, two-stage planar "
               "pose estimation, and insertion-search simulation"};
  app.require_subcommand(1);

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen", "Generate a dataset");
  gen->add_option("--out", gen_args.out, "Output directory")->required();
  gen->add_option("--split", gen_args.split, "Dataset kind")
      ->check(CLI::IsMember({"stage1", "stage2"}));
  gen->add_option("--count", gen_args.count, "Number of records")
      ->check(CLI::PositiveNumber);
  auto* gen_seed = gen->add_option("--seed", gen_args.seed, "Master seed");
  gen->add_option("--config", gen_args.config_path, "Config file (INI)");
  gen->add_option("--part", gen_args.part,
                  "Part class for stage2 splits (e.g. gear_1)");
  gen->add_option("--subclass", gen_args.subclass,
                  "Near-symmetry branch for stage2 splits");
  gen->add_flag("--images", gen_args.with_images,
                "Store rendered images next to the records");
  gen->add_flag("--noiseless", gen_args.noiseless, "Disable the sensor model");

  EstimateArgs est_args;
  CLI::App* est = app.add_subcommand(
      "estimate", "Run the two-stage pipeline over a stage1 dataset");
  est->add_option("--dataset", est_args.dataset, "Dataset directory")
      ->required();
  est->add_option("--out", est_args.out, "Output directory")->required();
  est->add_option("--config", est_args.config_path, "Config file (INI)");
  est->add_option("--count", est_args.count, "Limit the number of scenes");
  est->add_option("--template-blur", est_args.template_blur,
                  "Template blur sigma in pixels for stage-2 scoring");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand(
      "eval", "Compare estimated poses against dataset labels");
  eval->add_option("--dataset", eval_args.dataset, "Dataset directory")
      ->required();
  eval->add_option("--poses", eval_args.poses, "poses.json from estimate")
      ->required();
  eval->add_option("--out", eval_args.out, "Output directory")->required();
  eval->add_option("--config", eval_args.config_path, "Config file (INI)");
  eval->add_option("--match-radius", eval_args.match_radius,
                   "Truth-to-estimate match radius in meters");

  AssembleArgs asm_args;
  CLI::App* asmb = app.add_subcommand(
      "assemble", "Monte-Carlo insertion campaign over the search lattice");
  asmb->add_option("--out", asm_args.lattice.out, "Output directory")
      ->required();
  asmb->add_option("--config", asm_args.lattice.config_path,
                   "Config file (INI)");
  asmb->add_option("--hole-radius", asm_args.lattice.hole_radius,
                   "Hole radius R in meters");
  asmb->add_option("--peg-radius", asm_args.lattice.peg_radius,
                   "Peg radius r in meters");
  asmb->add_option("--search-x", asm_args.lattice.search_x,
                   "Search area extent in x, meters");
  asmb->add_option("--search-y", asm_args.lattice.search_y,
                   "Search area extent in y, meters");
  asmb->add_option("--spacing", asm_args.lattice.spacing,
                   "Lattice spacing in meters (default 2(R-r))");
  asmb->add_option("--error-model", asm_args.error_model,
                   "Place-error distribution")
      ->check(CLI::IsMember({"uniform", "gaussian"}));
  asmb->add_option("--error-scale", asm_args.error_scale,
                   "Disk radius or Gaussian sigma in meters");
  asmb->add_option("--trials", asm_args.trials, "Number of trials")
      ->check(CLI::PositiveNumber);
  asmb->add_option("--seed", asm_args.seed, "Campaign seed");
  asmb->add_option("--coverage-step", asm_args.coverage_step,
                   "Coverage grid step in meters");

  LatticeArgs lat_args;
  CLI::App* lat = app.add_subcommand(
      "lattice", "Dump the insertion-search lattice as CSV (x_mm,y_mm)");
  lat->add_option("--out", lat_args.out, "Output directory")->required();
  lat->add_option("--config", lat_args.config_path, "Config file (INI)");
  lat->add_option("--hole-radius", lat_args.hole_radius,
                  "Hole radius R in meters");
  lat->add_option("--peg-radius", lat_args.peg_radius,
                  "Peg radius r in meters");
  lat->add_option("--search-x", lat_args.search_x,
                  "Search area extent in x, meters");
  lat->add_option("--search-y", lat_args.search_y,
                  "Search area extent in y, meters");
  lat->add_option("--spacing", lat_args.spacing,
                  "Lattice spacing in meters (default 2(R-r))");

  RenderArgs render_args;
  CLI::App* rnd = app.add_subcommand(
      "render", "Debug-render a scene to PGM (16-bit depth plus 8-bit view)");
  rnd->add_option("--out", render_args.out, "Output directory")->required();
  rnd->add_option("--dataset", render_args.dataset,
                  "Render a dataset record instead of a fresh scene");
  rnd->add_option("--index", render_args.index, "Record or scene index");
  auto* rnd_seed =
      rnd->add_option("--seed", render_args.seed, "Master seed (fresh scenes)");
  rnd->add_option("--config", render_args.config_path, "Config file (INI)");
  rnd->add_flag("--noiseless", render_args.noiseless,
                "Disable the sensor model");

  if (argc > 1 && argv[1][0] != '-' &&
      app.get_subcommand_no_throw(argv[1]) == nullptr) {
    emit_error_record("usage", kExitUsage,
                      std::string("unknown subcommand '") + argv[1] + "'");
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc == 0) return 0;  // --help and friends
    emit_error_record("usage", kExitUsage, e.what());
    return kExitUsage;
  }
  gen_args.seed_set = gen_seed->count() > 0;
  render_args.seed_set = rnd_seed->count() > 0;

  try {
    if (gen->parsed()) return cmd_gen(gen_args);
    if (est->parsed()) return cmd_estimate(est_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (asmb->parsed()) return cmd_assemble(asm_args);
    if (lat->parsed()) return cmd_lattice(lat_args);
    if (rnd->parsed()) return cmd_render(render_args);
    emit_error_record("usage", kExitUsage, "no subcommand given");
    return kExitUsage;
  } catch (const ConfigError& e) {
    emit_error_record("config", kExitConfig, e.what());
    return kExitConfig;
  } catch (const InputError& e) {
    emit_error_record("input", kExitInput, e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    emit_error_record("runtime", kExitRuntime, e.what());
    return kExitRuntime;
  }
}

}  // namespace gearpose
