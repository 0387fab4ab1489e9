// Acceptance gate for the toolkit: ten end-to-end checks, one line each,
// with tolerances pinned in the code. Exits nonzero if any check fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gearpose/assembly.hpp"
#include "gearpose/catalog.hpp"
#include "gearpose/cli.hpp"
#include "gearpose/dataset.hpp"
#include "gearpose/geometry.hpp"
#include "gearpose/metrics.hpp"
#include "gearpose/pipeline.hpp"
#include "gearpose/render.hpp"
#include "gearpose/rng.hpp"
#include "gearpose/sensor.hpp"

using namespace gearpose;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

const std::vector<PartSpec>& catalog() {
  static const std::vector<PartSpec> c = builtin_catalog();
  return c;
}

const ReferenceEstimator& estimator() {
  static const ReferenceEstimator e(builtin_catalog(), default_intrinsics());
  return e;
}

// For noisy imagery the templates carry the sensor's expected blur, matching
// what the estimate command does when a dataset was generated with noise.
const ReferenceEstimator& noisy_estimator() {
  static const ReferenceEstimator e = [] {
    ReferenceEstimator::Options o;
    o.template_blur_sigma = 3.5;  // mid-range of the default blur band
    return ReferenceEstimator(builtin_catalog(), default_intrinsics(), o);
  }();
  return e;
}

double ang_dist(double a, double b) {
  return std::abs(normalize_degrees(a - b + 180.0) - 180.0);
}

double camera_yaw_deg(const RigidTransform& T) {
  return normalize_degrees(rad_to_deg(std::atan2(T.R(1, 0), T.R(0, 0))));
}

// --- 1: projection geometry ---

Outcome check_geometry() {
  Outcome out;
  const CameraIntrinsics k = default_intrinsics();
  Rng rng(11);
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const Vec2 px(rng.uniform(0.0, k.width - 1.0),
                  rng.uniform(0.0, k.height - 1.0));
    const double depth = rng.uniform(0.25, 0.75);
    const Vec2 back = project(deproject(px, depth, k), k);
    worst = std::max(worst, (back - px).norm());
  }
  for (int i = 0; i < 200; ++i) {
    const RigidTransform T =
        compose(rot_z_deg(rng.uniform(0.0, 360.0)),
                compose(rot_x_deg(rng.uniform(-30.0, 30.0)),
                        translation(Vec3(rng.uniform(-1.0, 1.0),
                                         rng.uniform(-1.0, 1.0),
                                         rng.uniform(-1.0, 1.0)))));
    const Vec3 p(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                 rng.uniform(-1.0, 1.0));
    const Vec3 back = apply(invert(T), apply(T, p));
    worst = std::max(worst, (back - p).norm());
  }
  if (worst >= 1e-9) out.fail(fmt("round-trip error %.3g >= 1e-9", worst));

  // One detection pixel of error costs height/f meters of world error, so
  // with a power-of-two focal length the error ratio across the two capture
  // heights is the height ratio, bit for bit.
  CameraIntrinsics k2;
  k2.fx = k2.fy = 512.0;
  k2.cx = 255.5;
  k2.cy = 191.5;
  k2.width = 512;
  k2.height = 384;
  const Vec2 center(k2.cx, k2.cy);
  const Vec2 offset(k2.cx + 64.0, k2.cy);
  const double err_distal =
      (deproject(offset, 0.53, k2) - deproject(center, 0.53, k2)).norm();
  const double err_close =
      (deproject(offset, 0.31, k2) - deproject(center, 0.31, k2)).norm();
  if (err_distal / err_close != 0.53 / 0.31) {
    out.fail(fmt("height error ratio %.17g != %.17g exactly",
                 err_distal / err_close, 0.53 / 0.31));
  }
  out.note(fmt("worst round-trip %.2g", worst));
  return out;
}

// --- 2: rasterizer vs ray caster ---

Outcome check_renderers_agree() {
  Outcome out;
  GenConfig cfg;
  cfg.master_seed = 4242;
  cfg.intrinsics = intrinsics_from_hfov(64, 64, 65.0);
  const CameraIntrinsics k = effective_intrinsics(cfg);

  long long agree = 0, total = 0;
  for (int i = 0; i < 20; ++i) {
    const Stage1Sample s = stage1_sample_at(cfg, catalog(), i);
    const DepthImage raster = render(s.scene, catalog(), k, s.camera_pose);
    const DepthImage rays =
        raycast_reference(s.scene, catalog(), k, s.camera_pose);
    for (Eigen::Index j = 0; j < raster.data.size(); ++j) {
      ++total;
      if (std::abs(raster.data(j) - rays.data(j)) <= 1e-6) ++agree;
    }
  }
  const double frac = static_cast<double>(agree) / static_cast<double>(total);
  if (frac < 0.995) {
    out.fail(fmt("only %.4f%% of pixels within 1e-6 m", frac * 100.0));
  }
  out.note(fmt("%.3f%% of %lld px within 1e-6 m", frac * 100.0, total));
  return out;
}

// --- 3: exact symmetry renders bit-identically ---

Outcome check_symmetry_renders() {
  Outcome out;
  const CameraIntrinsics k = default_intrinsics();
  const RigidTransform cam = top_down_camera(0.0, 0.0, 0.40);
  const auto render_one = [&](PartClass c, double x, double y, double theta) {
    Scene scene;
    scene.table_depth = 0.40;
    scene.placements.push_back({c, PlanarPose::make(x, y, theta)});
    return render(scene, catalog(), k, cam);
  };

  const DepthImage g2a = render_one(PartClass::Gear2, 0.013, -0.007, 17.0);
  const DepthImage g2b = render_one(PartClass::Gear2, 0.013, -0.007, 107.0);
  if (!(g2a.data == g2b.data).all()) {
    out.fail("gear_2 renders differ under a 90 deg turn");
  }
  const DepthImage cga = render_one(PartClass::CompoundGear, -0.02, 0.01, 5.0);
  const DepthImage cgb = render_one(PartClass::CompoundGear, -0.02, 0.01, 35.0);
  if (!(cga.data == cgb.data).all()) {
    out.fail("compound_gear renders differ under a 30 deg turn");
  }
  // Near-symmetric control: the branch feature must be visible to depth.
  const DepthImage g1a = render_one(PartClass::Gear1, 0.0, 0.0, 17.0);
  const DepthImage g1b = render_one(PartClass::Gear1, 0.0, 0.0, 107.0);
  if ((g1a.data == g1b.data).all()) {
    out.fail("gear_1 renders identically under a 90 deg turn; branches "
             "would be unresolvable");
  }
  return out;
}

// --- 4: orientation codec ---

Outcome check_orientation_codec() {
  Outcome out;
  Rng rng(44);
  double worst = 0.0;
  for (int n : {1, 2, 4, 12}) {
    const double domain = 360.0 / n;
    for (int i = 0; i < 10000; ++i) {
      const double theta = rng.uniform(0.0, 360.0);
      const auto [s, c] = encode_orientation(theta, n);
      const double back = decode_orientation(s, c, n);
      const double truth = std::fmod(theta, domain);
      const double delta = std::abs(back - truth);
      worst = std::max(worst, std::min(delta, domain - delta));
    }
  }
  if (worst >= 1e-9) out.fail(fmt("codec error %.3g deg >= 1e-9", worst));

  if (std::fmod(215.0, 90.0) != 35.0) out.fail("fmod(215, 90) != 35");
  const CanonicalAngle a =
      canonical_angle(215.0, find_part(catalog(), PartClass::Gear1));
  if (a.subclass != 2 || a.residual_deg != 35.0) {
    out.fail(fmt("canonical_angle(215) = (%d, %.17g), want (2, 35)",
                 a.subclass, a.residual_deg));
  }
  out.note(fmt("worst codec error %.2g deg", worst));
  return out;
}

// --- 5: scene statistics ---

Outcome check_scene_statistics() {
  Outcome out;
  GenConfig cfg;
  cfg.master_seed = 1001;
  const int n_scenes = 10000;
  long long total_parts = 0;
  std::array<long long, kPartClassCount> counts{};
  for (int i = 0; i < n_scenes; ++i) {
    const Stage1Sample s = stage1_sample_at(cfg, catalog(), i);
    total_parts += static_cast<long long>(s.scene.placements.size());
    for (const Placement& p : s.scene.placements) {
      ++counts[static_cast<std::size_t>(p.class_id)];
    }
  }
  const double mean = static_cast<double>(total_parts) / n_scenes;
  if (mean < 3.1 || mean > 3.3) {
    out.fail(fmt("mean parts per scene %.4f outside [3.1, 3.3]", mean));
  }
  const double per_class =
      static_cast<double>(total_parts) / kPartClassCount;
  for (int c = 0; c < kPartClassCount; ++c) {
    const double count = static_cast<double>(counts[static_cast<std::size_t>(c)]);
    if (count < 0.9 * per_class || count > 1.1 * per_class) {
      out.fail(fmt("%s count %.0f outside +/-10%% of %.0f",
                   std::string(to_string(static_cast<PartClass>(c))).c_str(),
                   count, per_class));
    }
  }
  out.note(fmt("mean %.4f parts per scene", mean));
  return out;
}

// --- shared driver for 6 and 7 ---

struct SceneEval {
  std::vector<EvalSample> stage1;
  std::vector<EvalSample> stage2;
  int detections = 0;
  int truths = 0;
  int class_violations = 0;
};

SceneEval run_scene(const GenConfig& cfg, int index, std::uint64_t closeup_tag,
                    const ReferenceEstimator& est) {
  const Stage1Sample sample = stage1_sample_at(cfg, catalog(), index);
  const CameraIntrinsics k = effective_intrinsics(cfg);

  ViewSet views;
  views.k = k;
  views.table_depth = cfg.stage1_height;
  views.cameras.push_back(sample.camera_pose);
  views.images.push_back(render_sample_image(
      cfg, catalog(), sample.scene, sample.camera_pose, sample.noise_seed));

  EstimateOptions opts;
  opts.noise_enabled = cfg.noise_enabled;
  opts.noise = cfg.noise;
  opts.closeup_seed = derive_seed(
      cfg.master_seed, {closeup_tag, static_cast<std::uint64_t>(index)});
  const EstimateResult result =
      estimate_all(views, sample.scene, catalog(), est, opts);

  SceneEval ev;
  ev.truths = static_cast<int>(sample.scene.placements.size());
  ev.detections = static_cast<int>(result.detections.size());
  ev.stage1 = evaluate_stage1(sample.scene, catalog(), result.detections);
  ev.stage2 = evaluate_stage2(sample.scene, catalog(), result.poses);
  for (const Detection& d : result.detections) {
    double best = 1e9;
    PartClass best_class = d.class_id;
    for (const Placement& p : sample.scene.placements) {
      const double dist =
          (d.world_position - Vec2(p.pose.x, p.pose.y)).norm();
      if (dist < best) {
        best = dist;
        best_class = p.class_id;
      }
    }
    if (best > 0.03 || best_class != d.class_id) ++ev.class_violations;
  }
  return ev;
}

// --- 6: noiseless end-to-end accuracy ---

Outcome check_noiseless_pipeline() {
  Outcome out;
  GenConfig cfg;
  cfg.master_seed = 2001;
  cfg.noise_enabled = false;

  int truths = 0, detected1 = 0, detected2 = 0, violations = 0;
  std::vector<double> trans2, rot2;
  for (int i = 0; i < 200; ++i) {
    const SceneEval ev = run_scene(cfg, i, 9, estimator());
    truths += ev.truths;
    violations += ev.class_violations;
    for (const EvalSample& s : ev.stage1) detected1 += s.detected ? 1 : 0;
    for (const EvalSample& s : ev.stage2) {
      if (!s.detected) continue;
      ++detected2;
      trans2.push_back(s.translation_mm);
      rot2.push_back(s.rotation_deg);
    }
  }
  if (detected1 != truths) {
    out.fail(fmt("stage-1 detection %d/%d", detected1, truths));
  }
  if (detected2 != truths) {
    out.fail(fmt("stage-2 detection %d/%d", detected2, truths));
  }
  if (violations != 0) {
    out.fail(fmt("%d detections classified wrong", violations));
  }
  const ErrorStats t = error_stats(trans2);
  const ErrorStats r = error_stats(rot2);
  if (!(t.mean < 1.0)) out.fail(fmt("translation mean %.3f mm >= 1.0", t.mean));
  if (!(r.mean < 0.5)) out.fail(fmt("rotation mean %.3f deg >= 0.5", r.mean));
  out.note(fmt("%d parts, translation %.3f mm, rotation %.3f deg", truths,
               t.mean, r.mean));
  return out;
}

// --- 7: refinement beats the distal estimate under noise ---

Outcome check_noisy_refinement() {
  Outcome out;
  GenConfig cfg;
  cfg.master_seed = 3001;
  cfg.noise_enabled = true;

  std::vector<double> trans1, trans2;
  std::vector<EvalSample> all_stage2;
  for (int i = 0; i < 110; ++i) {
    const SceneEval ev = run_scene(cfg, i, 9, noisy_estimator());
    for (std::size_t j = 0; j < ev.stage1.size(); ++j) {
      all_stage2.push_back(ev.stage2[j]);
      if (ev.stage1[j].detected && ev.stage2[j].detected) {
        trans1.push_back(ev.stage1[j].translation_mm);
        trans2.push_back(ev.stage2[j].translation_mm);
      }
    }
  }
  const int pairs = static_cast<int>(trans1.size());
  if (pairs < 300) {
    out.fail(fmt("only %d parts detected at both stages, need 300", pairs));
  }
  const double mean1 = error_stats(trans1).mean;
  const double mean2 = error_stats(trans2).mean;
  if (!(mean2 < mean1)) {
    out.fail(fmt("stage-2 translation %.3f mm not below stage-1 %.3f mm",
                 mean2, mean1));
  }

  const MetricsReport report = aggregate(all_stage2);
  if (report.parts.size() != static_cast<std::size_t>(kPartClassCount)) {
    out.fail(fmt("report covers %zu classes, want %d", report.parts.size(),
                 kPartClassCount));
  }
  const std::string table = format_table(report);
  if (std::count(table.begin(), table.end(), '\n') != kPartClassCount + 2) {
    out.fail("per-class table shape unexpected");
  }
  std::printf("%s", table.c_str());
  out.note(fmt("stage-1 %.3f mm -> stage-2 %.3f mm over %d parts", mean1,
               mean2, pairs));
  return out;
}

// --- 8: near-symmetry branch resolution ---

Outcome check_branch_resolution() {
  Outcome out;
  const PartSpec& gear1 = find_part(catalog(), PartClass::Gear1);
  if (gear1.asymmetry_scale != 0.002) {
    out.fail(fmt("gear_1 asymmetry scale %.4f m, want 0.002", gear1.asymmetry_scale));
  }

  const auto run_trials = [&](bool noisy) {
    GenConfig cfg;
    cfg.master_seed = 5005;
    cfg.noise_enabled = noisy;
    const CameraIntrinsics k = effective_intrinsics(cfg);
    int correct = 0;
    for (int i = 0; i < 200; ++i) {
      const int subclass = i % gear1.subclass_count;
      const Stage2Sample s = stage2_sample_at(cfg, gear1, subclass, i);
      const NormalizedImage img = render_sample_image(
          cfg, catalog(), s.scene, s.camera_pose, s.noise_seed);
      Detection prior;
      prior.class_id = PartClass::Gear1;
      prior.world_position = Vec2(s.camera_pose.t.x(), s.camera_pose.t.y());
      prior.coarse_theta = camera_yaw_deg(s.camera_pose);
      const ReferenceEstimator& est = noisy ? noisy_estimator() : estimator();
      const RefinedPose pose =
          est.stage2(img, k, s.camera_pose, prior, gear1, cfg.stage2_height);
      if (pose.status == RefineStatus::Ok && pose.subclass == subclass) {
        ++correct;
      }
    }
    return correct;
  };

  const int clean = run_trials(false);
  const int noisy = run_trials(true);
  if (clean != 200) out.fail(fmt("noiseless branch accuracy %d/200", clean));
  if (noisy < 190) out.fail(fmt("noisy branch accuracy %d/200 < 95%%", noisy));
  out.note(fmt("noiseless %d/200, noisy %d/200", clean, noisy));
  return out;
}

// --- 9: insertion search lattice ---

Outcome check_lattice() {
  Outcome out;
  const InsertionSpec spec{0.0055, 0.0050, 0.010, 0.010};
  const SearchLattice lattice = build_lattice(spec);  // spacing 2(R-r) = 1 mm

  // Independent membership oracle: a generous integer box scan.
  const double clearance = spec.hole_radius - spec.peg_radius;
  const double half_x = (spec.search_area_x + 2.0 * clearance) / 2.0;
  const double half_y = (spec.search_area_y + 2.0 * clearance) / 2.0;
  std::set<std::pair<long long, long long>> brute;
  for (int j = -60; j <= 60; ++j) {
    for (int i = -60; i <= 60; ++i) {
      const double x = (i + 0.5 * j) * lattice.spacing;
      const double y = j * lattice.spacing * std::sqrt(3.0) / 2.0;
      if (std::abs(x) <= half_x && std::abs(y) <= half_y) {
        brute.insert({std::llround(x * 1e9), std::llround(y * 1e9)});
      }
    }
  }
  std::set<std::pair<long long, long long>> built;
  for (const Vec2& o : lattice.offsets) {
    built.insert({std::llround(o.x() * 1e9), std::llround(o.y() * 1e9)});
  }
  if (built != brute || lattice.offsets.size() != brute.size()) {
    out.fail(fmt("lattice has %zu points, oracle %zu", lattice.offsets.size(),
                 brute.size()));
  }

  const SearchLattice covering = build_lattice(spec, covering_spacing(spec));
  const double full = measure_coverage(spec, covering, 1e-5);
  if (full != 1.0) {
    out.fail(fmt("covering-spacing coverage %.6f != 1", full));
  }
  const double sparse = measure_coverage(spec, lattice, 1e-5);
  const double sparse_again = measure_coverage(spec, lattice, 1e-5);
  if (sparse != sparse_again) out.fail("default-spacing coverage not stable");
  if (!(sparse > 0.0 && sparse < 1.0)) {
    out.fail(fmt("default-spacing coverage %.6f not in (0, 1)", sparse));
  }

  const int n = 20000;
  const CampaignStats stats =
      run_assembly_campaign(uniform_disk_error(0.002), spec, lattice, n, 7);
  const double p = std::pow(clearance / 0.002, 2.0);
  const double se = std::sqrt(p * (1.0 - p) / n);
  const double first = 1.0 - stats.feedback_rate;
  if (std::abs(first - p) >= 3.0 * se) {
    out.fail(fmt("first-attempt rate %.5f vs analytic %.5f (3 SE = %.5f)",
                 first, p, 3.0 * se));
  }
  out.note(fmt("%zu points, default coverage %.4f, first-attempt %.4f vs %.4f",
               lattice.offsets.size(), sparse, first, p));
  return out;
}

// --- 10: CLI byte-level determinism ---

int run_cli_args(std::vector<std::string> args) {
  args.insert(args.begin(), "gearpose");
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const std::string& s : args) argv.push_back(s.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "<unreadable:" + path.string() + ">";
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome check_cli_determinism() {
  Outcome out;
  const fs::path root = fs::temp_directory_path() / "gearpose_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);

  for (const char* tag : {"a", "b"}) {
    const fs::path base = root / tag;
    const std::string data = (base / "data").string();
    if (run_cli_args({"gen", "--split", "stage1", "--count", "2", "--seed",
                      "5", "--noiseless", "--out", data}) != 0 ||
        run_cli_args({"estimate", "--dataset", data, "--out",
                      (base / "est").string()}) != 0 ||
        run_cli_args({"eval", "--dataset", data, "--poses",
                      (base / "est" / "poses.json").string(), "--out",
                      (base / "eval").string()}) != 0 ||
        run_cli_args({"assemble", "--out", (base / "asm").string(),
                      "--trials", "300", "--seed", "3"}) != 0 ||
        run_cli_args({"lattice", "--out", (base / "lat").string()}) != 0) {
      out.fail(std::string("a CLI run failed under ") + tag);
    }
  }
  if (out.pass) {
    const char* files[] = {
        "data/manifest.json",       "data/scenes/scene_000001.json",
        "data/run_manifest.json",   "est/poses.json",
        "eval/report.json",         "eval/report.txt",
        "asm/campaign.json",        "lat/lattice.csv",
    };
    for (const char* f : files) {
      if (slurp(root / "a" / f) != slurp(root / "b" / f)) {
        out.fail(fmt("%s differs between identical runs", f));
      }
    }
  }
  fs::remove_all(root);
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> fn;
    double time_budget_s;  // 0 = untimed
  };
  const std::vector<Criterion> criteria = {
      {"1 projection geometry round-trips; error ratio across heights exact",
       check_geometry, 1.0},
      {"2 rasterizer matches the ray-cast reference on random scenes",
       check_renderers_agree, 30.0},
      {"3 exactly symmetric parts render bit-identically under their turn",
       check_symmetry_renders, 0.0},
      {"4 orientation codec exact to 1e-9 across all symmetry orders",
       check_orientation_codec, 0.0},
      {"5 scene statistics: 3.2 parts per scene, balanced classes",
       check_scene_statistics, 120.0},
      {"6 noiseless pipeline: perfect detection, sub-mm, sub-half-degree",
       check_noiseless_pipeline, 300.0},
      {"7 noisy pipeline: close-up refinement beats the distal estimate",
       check_noisy_refinement, 0.0},
      {"8 gear_1 branch resolution: perfect clean, 95% noisy",
       check_branch_resolution, 0.0},
      {"9 insertion lattice: exact membership, covering, analytic success",
       check_lattice, 0.0},
      {"10 CLI outputs byte-identical under fixed seed and config",
       check_cli_determinism, 0.0},
  };

  int failures = 0;
  const auto suite_start = std::chrono::steady_clock::now();
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out = c.fn();
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (c.time_budget_s > 0.0 && elapsed > c.time_budget_s) {
      out.fail(fmt("took %.1f s, budget %.0f s", elapsed, c.time_budget_s));
    }
    std::printf("[%s] %s%s%s (%.1fs)\n", out.pass ? "PASS" : "FAIL", c.name,
                out.detail.empty() ? "" : ": ", out.detail.c_str(), elapsed);
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    suite_start)
          .count();
  std::printf("%d/10 criteria passed in %.1f s\n",
              static_cast<int>(criteria.size()) - failures, total);
  return failures == 0 ? 0 : 1;
}
