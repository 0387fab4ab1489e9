#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gearpose/geometry.hpp"
#include "gearpose/rng.hpp"

namespace gearpose {

/// Peg-into-hole geometry plus the rectangle of place-pose errors the search
/// must handle (full extents, meters).
struct InsertionSpec {
  double hole_radius = 0.0;  // R
  double peg_radius = 0.0;   // r
  double search_area_x = 0.010;
  double search_area_y = 0.010;
};

void validate_insertion(const InsertionSpec& spec);

/// Probe offsets for the insertion search. Offsets form a triangular lattice
/// ordered outward from the first entry (0, 0): ascending distance, ties by
/// ascending polar angle. The stored area is the probe window: the search
/// area inflated by the insertion clearance, so every target inside the
/// search area keeps its covering lattice point inside the window.
struct SearchLattice {
  std::vector<Vec2> offsets;
  double spacing = 0.0;
  double area_x = 0.0;
  double area_y = 0.0;
};

/// Triangular lattice with the given spacing (default 2(R-r)), one point at
/// the origin, clipped to the clearance-inflated search window.
SearchLattice build_lattice(const InsertionSpec& spec,
                            std::optional<double> spacing_override = {});

/// Spacing that makes the lattice a covering: every point of the plane lies
/// within R-r of a lattice point.
double covering_spacing(const InsertionSpec& spec);

struct AssemblyTrial {
  Vec2 true_offset = Vec2::Zero();
  int attempts = 0;
  bool success = false;
  bool feedback_invoked = false;  // always equals attempts > 1
};

/// Walks the lattice in order; an attempt at offset o succeeds when the peg
/// falls inside the hole, |o - true_offset| <= R - r. A failed first attempt
/// models the contact force that triggers the feedback search; lattice
/// exhaustion models abandoning the part.
AssemblyTrial simulate_insertion(const Vec2& true_offset,
                                 const InsertionSpec& spec,
                                 const SearchLattice& lattice);

struct CampaignStats {
  double success_rate = 0.0;
  double feedback_rate = 0.0;
  double mean_attempts_when_invoked = 0.0;
  int trials = 0;
};

using ErrorModel = std::function<Vec2(Rng&)>;

/// Uniform over a disk of the given radius.
ErrorModel uniform_disk_error(double radius);
/// Isotropic Gaussian with the given per-axis sigma.
ErrorModel gaussian_error(double sigma);

/// Monte-Carlo insertion campaign; per-trial seeds derive from the campaign
/// seed, so results are independent of evaluation order.
CampaignStats run_assembly_campaign(const ErrorModel& error_model,
                                    const InsertionSpec& spec,
                                    const SearchLattice& lattice, int n_trials,
                                    std::uint64_t seed);

/// Fraction of true offsets on a regular grid over the search area that some
/// lattice offset would insert successfully.
double measure_coverage(const InsertionSpec& spec, const SearchLattice& lattice,
                        double grid_step = 1e-5);

/// End-effector world pose for grasping a part at the given world pose.
RigidTransform grasp_pose(const RigidTransform& part_world,
                          const RigidTransform& grasp_in_part);

/// End-effector world pose for placing into a target defined on the plate.
RigidTransform place_pose(const RigidTransform& plate_world,
                          const RigidTransform& target_in_plate);

}  // namespace gearpose
