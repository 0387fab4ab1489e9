#include "gearpose/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gearpose {

namespace {

struct LatticePoint {
  long long i = 0;  // axial coordinates: x = (i + j/2) d, y = j sqrt(3)/2 d
  long long j = 0;
  Vec2 pos = Vec2::Zero();
};

/// Squared distance from the origin in lattice units: exact in integers, so
/// ring grouping never suffers from rounding.
long long ring_key(const LatticePoint& p) {
  return p.i * p.i + p.i * p.j + p.j * p.j;
}

double polar_angle(const Vec2& v) {
  if (v.x() == 0.0 && v.y() == 0.0) return 0.0;
  double a = std::atan2(v.y(), v.x());
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  return a;
}

}  // namespace

void validate_insertion(const InsertionSpec& spec) {
  if (!(spec.hole_radius > spec.peg_radius) || !(spec.peg_radius > 0.0)) {
    throw std::invalid_argument("InsertionSpec: requires R > r > 0");
  }
  if (spec.search_area_x <= 0.0 || spec.search_area_y <= 0.0) {
    throw std::invalid_argument("InsertionSpec: search area must be positive");
  }
}

double covering_spacing(const InsertionSpec& spec) {
  validate_insertion(spec);
  return std::sqrt(3.0) * (spec.hole_radius - spec.peg_radius);
}

SearchLattice build_lattice(const InsertionSpec& spec,
                            std::optional<double> spacing_override) {
  validate_insertion(spec);
  const double clearance = spec.hole_radius - spec.peg_radius;
  const double d = spacing_override.value_or(2.0 * clearance);
  if (!(d > 0.0)) {
    throw std::invalid_argument("build_lattice: spacing must be positive");
  }

  SearchLattice lattice;
  lattice.spacing = d;
  lattice.area_x = spec.search_area_x + 2.0 * clearance;
  lattice.area_y = spec.search_area_y + 2.0 * clearance;

  const double half_x = lattice.area_x / 2.0;
  const double half_y = lattice.area_y / 2.0;
  const double row_h = d * std::sqrt(3.0) / 2.0;
  const long long j_max = static_cast<long long>(std::floor(half_y / row_h));
  std::vector<LatticePoint> points;
  for (long long j = -j_max; j <= j_max; ++j) {
    const double y = j * row_h;
    // x = (i + j/2) d within [-half_x, half_x]
    const long long i_lo =
        static_cast<long long>(std::ceil(-half_x / d - 0.5 * j));
    const long long i_hi =
        static_cast<long long>(std::floor(half_x / d - 0.5 * j));
    for (long long i = i_lo; i <= i_hi; ++i) {
      LatticePoint p;
      p.i = i;
      p.j = j;
      p.pos = Vec2((i + 0.5 * j) * d, y);
      points.push_back(p);
    }
  }

  std::sort(points.begin(), points.end(),
            [](const LatticePoint& a, const LatticePoint& b) {
              const long long ka = ring_key(a), kb = ring_key(b);
              if (ka != kb) return ka < kb;
              return polar_angle(a.pos) < polar_angle(b.pos);
            });

  lattice.offsets.reserve(points.size());
  for (const LatticePoint& p : points) lattice.offsets.push_back(p.pos);
  return lattice;
}

AssemblyTrial simulate_insertion(const Vec2& true_offset,
                                 const InsertionSpec& spec,
                                 const SearchLattice& lattice) {
  validate_insertion(spec);
  if (lattice.offsets.empty()) {
    throw std::invalid_argument("simulate_insertion: empty lattice");
  }
  const double clearance = spec.hole_radius - spec.peg_radius;
  AssemblyTrial trial;
  trial.true_offset = true_offset;
  for (std::size_t i = 0; i < lattice.offsets.size(); ++i) {
    trial.attempts = static_cast<int>(i) + 1;
    if ((lattice.offsets[i] - true_offset).norm() <= clearance) {
      trial.success = true;
      break;
    }
  }
  trial.feedback_invoked = trial.attempts > 1;
  return trial;
}

ErrorModel uniform_disk_error(double radius) {
  if (!(radius >= 0.0)) {
    throw std::invalid_argument("uniform_disk_error: negative radius");
  }
  return [radius](Rng& rng) {
    const double r = radius * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    return Vec2(r * std::cos(phi), r * std::sin(phi));
  };
}

ErrorModel gaussian_error(double sigma) {
  if (!(sigma >= 0.0)) {
    throw std::invalid_argument("gaussian_error: negative sigma");
  }
  return [sigma](Rng& rng) {
    return Vec2(rng.normal(0.0, sigma), rng.normal(0.0, sigma));
  };
}

CampaignStats run_assembly_campaign(const ErrorModel& error_model,
                                    const InsertionSpec& spec,
                                    const SearchLattice& lattice, int n_trials,
                                    std::uint64_t seed) {
  if (n_trials < 1) {
    throw std::invalid_argument("run_assembly_campaign: need at least 1 trial");
  }
  int successes = 0;
  int feedback = 0;
  long long feedback_attempts = 0;
  for (int t = 0; t < n_trials; ++t) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
    const Vec2 offset = error_model(rng);
    const AssemblyTrial trial = simulate_insertion(offset, spec, lattice);
    if (trial.success) ++successes;
    if (trial.feedback_invoked) {
      ++feedback;
      feedback_attempts += trial.attempts;
    }
  }
  CampaignStats stats;
  stats.trials = n_trials;
  stats.success_rate = static_cast<double>(successes) / n_trials;
  stats.feedback_rate = static_cast<double>(feedback) / n_trials;
  stats.mean_attempts_when_invoked =
      feedback > 0 ? static_cast<double>(feedback_attempts) / feedback : 0.0;
  return stats;
}

double measure_coverage(const InsertionSpec& spec, const SearchLattice& lattice,
                        double grid_step) {
  validate_insertion(spec);
  if (!(grid_step > 0.0)) {
    throw std::invalid_argument("measure_coverage: grid step must be positive");
  }
  const double clearance = spec.hole_radius - spec.peg_radius;
  const double c2 = clearance * clearance;
  const long long nx =
      static_cast<long long>(std::floor(spec.search_area_x / 2.0 / grid_step));
  const long long ny =
      static_cast<long long>(std::floor(spec.search_area_y / 2.0 / grid_step));
  long long covered = 0;
  long long total = 0;
  for (long long iy = -ny; iy <= ny; ++iy) {
    for (long long ix = -nx; ix <= nx; ++ix) {
      const Vec2 p(ix * grid_step, iy * grid_step);
      ++total;
      for (const Vec2& o : lattice.offsets) {
        if ((o - p).squaredNorm() <= c2) {
          ++covered;
          break;
        }
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(total);
}

RigidTransform grasp_pose(const RigidTransform& part_world,
                          const RigidTransform& grasp_in_part) {
  return compose(part_world, grasp_in_part);
}

RigidTransform place_pose(const RigidTransform& plate_world,
                          const RigidTransform& target_in_plate) {
  return compose(plate_world, target_in_plate);
}

}  // namespace gearpose
