#include "gearpose/catalog.hpp"

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "gearpose/config.hpp"

namespace gearpose {
namespace {

using Outline = std::vector<Vec2>;

/// Symmetry-marker height as a multiple of the asymmetry scale. At the
/// default 2 mm scale the marker rises 10 mm, which keeps its depth step
/// above the sensor's blur-plus-quantization floor while the silhouette
/// stays unchanged.
constexpr double kMarkerHeightFactor = 5.0;

Vec2 polar(double radius, double angle_deg) {
  const double a = deg_to_rad(angle_deg);
  return Vec2(radius * std::cos(a), radius * std::sin(a));
}

/// Trapezoidal tooth profile. Five outline points per tooth; angles are
/// fractions of the tooth pitch so any tooth count divisible by the target
/// symmetry order keeps the outline exactly periodic.
struct ToothProfile {
  int teeth = 0;
  double root_radius = 0.0;
  double tip_radius = 0.0;
};

void gear_angles_radii(const ToothProfile& p, std::vector<double>& angles,
                       std::vector<double>& radii) {
  const double pitch = 360.0 / p.teeth;
  for (int i = 0; i < p.teeth; ++i) {
    const double a0 = i * pitch;
    angles.insert(angles.end(),
                  {a0, a0 + 0.30 * pitch, a0 + 0.38 * pitch, a0 + 0.62 * pitch,
                   a0 + 0.70 * pitch});
    radii.insert(radii.end(), {p.root_radius, p.root_radius, p.tip_radius,
                               p.tip_radius, p.root_radius});
  }
}

void add_wall(Mesh& m, int loop_a, int loop_b, int n, bool closed) {
  // Quad strip between two vertex loops of equal length, already in m.
  const int last = closed ? n : n - 1;
  for (int i = 0; i < last; ++i) {
    const int j = (i + 1) % n;
    m.triangles.push_back({loop_a + i, loop_a + j, loop_b + j});
    m.triangles.push_back({loop_a + i, loop_b + j, loop_b + i});
  }
}

/// Extruded annulus whose outer boundary is a toothed outline and whose
/// inner boundary is a circle sampled at the same angles, so the top and
/// bottom faces triangulate as clean quad strips.
Mesh toothed_ring(const ToothProfile& profile, double hole_radius, double z0,
                  double z1) {
  std::vector<double> angles, radii;
  gear_angles_radii(profile, angles, radii);
  const int n = static_cast<int>(angles.size());

  Mesh m;
  m.vertices.reserve(static_cast<std::size_t>(n) * 4);
  auto add_loop = [&](bool outer, double z) {
    const int base = static_cast<int>(m.vertices.size());
    for (int i = 0; i < n; ++i) {
      const Vec2 p = polar(outer ? radii[static_cast<std::size_t>(i)] : hole_radius,
                           angles[static_cast<std::size_t>(i)]);
      m.vertices.emplace_back(p.x(), p.y(), z);
    }
    return base;
  };
  const int out_top = add_loop(true, z1);
  const int in_top = add_loop(false, z1);
  const int out_bot = add_loop(true, z0);
  const int in_bot = add_loop(false, z0);

  add_wall(m, out_top, in_top, n, true);   // top face ring
  add_wall(m, in_bot, out_bot, n, true);   // bottom face ring
  add_wall(m, out_bot, out_top, n, true);  // outer wall
  add_wall(m, in_top, in_bot, n, true);    // hole wall
  return m;
}

/// Extruded polygon without a hole, triangulated by fanning from `center`
/// (the outline must be star-shaped around it).
Mesh prism(const Outline& outline, const Vec2& center, double z0, double z1) {
  const int n = static_cast<int>(outline.size());
  Mesh m;
  auto add_loop = [&](double z) {
    const int base = static_cast<int>(m.vertices.size());
    for (const Vec2& p : outline) m.vertices.emplace_back(p.x(), p.y(), z);
    return base;
  };
  const int top = add_loop(z1);
  const int bot = add_loop(z0);
  const int c_top = static_cast<int>(m.vertices.size());
  m.vertices.emplace_back(center.x(), center.y(), z1);
  const int c_bot = static_cast<int>(m.vertices.size());
  m.vertices.emplace_back(center.x(), center.y(), z0);

  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    m.triangles.push_back({c_top, top + i, top + j});
    m.triangles.push_back({c_bot, bot + j, bot + i});
  }
  add_wall(m, bot, top, n, true);
  return m;
}

Mesh cylinder(const Vec2& center, double radius, double z0, double z1,
              int segments) {
  Outline outline;
  outline.reserve(static_cast<std::size_t>(segments));
  for (int i = 0; i < segments; ++i) {
    outline.push_back(center + polar(radius, 360.0 * i / segments));
  }
  return prism(outline, center, z0, z1);
}

Mesh box(const Vec2& center, double half_x, double half_y, double z0,
         double z1) {
  const Outline outline = {center + Vec2(-half_x, -half_y),
                           center + Vec2(half_x, -half_y),
                           center + Vec2(half_x, half_y),
                           center + Vec2(-half_x, half_y)};
  return prism(outline, center, z0, z1);
}

/// Stepped cylinder lying along +x, resting on the table: the axis sits at
/// z = mid_radius. Sections: thin end, mid, thin end, mirror-symmetric about
/// x = 0 so a 180 degree yaw maps the shaft onto itself. The boss on one end
/// of the mid section is the only symmetry breaker.
Mesh lying_shaft(double length, double mid_radius, double end_radius,
                 double end_length, double asymmetry) {
  constexpr int kSegments = 24;  // even, so yaw by 180 maps the ring to itself
  const double half = length / 2.0;
  const double mid_half = half - end_length;
  const double axis_z = mid_radius;

  Mesh m;
  auto ring = [&](double x, double r) {
    const int base = static_cast<int>(m.vertices.size());
    for (int i = 0; i < kSegments; ++i) {
      const double a = deg_to_rad(360.0 * i / kSegments);
      m.vertices.emplace_back(x, r * std::cos(a), axis_z + r * std::sin(a));
    }
    return base;
  };
  auto disc = [&](double x, double r, bool outward) {
    const int base = ring(x, r);
    const int c = static_cast<int>(m.vertices.size());
    m.vertices.emplace_back(x, 0.0, axis_z);
    for (int i = 0; i < kSegments; ++i) {
      const int j = (i + 1) % kSegments;
      if (outward) {
        m.triangles.push_back({c, base + i, base + j});
      } else {
        m.triangles.push_back({c, base + j, base + i});
      }
    }
    return base;
  };

  // End discs.
  disc(-half, end_radius, false);
  disc(half, end_radius, true);
  // Thin end walls.
  add_wall(m, ring(-half, end_radius), ring(-mid_half, end_radius), kSegments,
           true);
  add_wall(m, ring(mid_half, end_radius), ring(half, end_radius), kSegments,
           true);
  // Step annuli at the section junctions.
  add_wall(m, ring(-mid_half, end_radius), ring(-mid_half, mid_radius),
           kSegments, true);
  add_wall(m, ring(mid_half, mid_radius), ring(mid_half, end_radius),
           kSegments, true);
  // Mid wall.
  add_wall(m, ring(-mid_half, mid_radius), ring(mid_half, mid_radius),
           kSegments, true);

  if (asymmetry > 0.0) {
    const double boss_half_x = 0.005;
    const double boss_half_y = 0.6 * mid_radius;
    const double boss_x = mid_half - boss_half_x - 0.001;
    // Bottom tucked below the cylinder crown so the sides meet the surface;
    // top rises kMarkerHeightFactor times `asymmetry` above the crown, tall
    // enough that the step survives sensor blur and quantization.
    const double z0 = axis_z + std::sqrt(mid_radius * mid_radius -
                                         boss_half_y * boss_half_y);
    const double z1 = axis_z + mid_radius + kMarkerHeightFactor * asymmetry;
    append_mesh(m, box(Vec2(boss_x, 0.0), boss_half_x, boss_half_y, z0, z1));
  }
  return m;
}

Mesh base_plate_mesh(const CatalogOptions& o) {
  const double hx = o.plate_size_x / 2.0;
  const double hy = o.plate_size_y / 2.0;
  const double notch = 0.020;
  // Corner notch keeps the plate asymmetric under any yaw.
  const Outline outline = {
      {-hx, -hy}, {hx, -hy}, {hx, hy - notch}, {hx - notch, hy - notch},
      {hx - notch, hy}, {-hx, hy}};
  Mesh m = prism(outline, Vec2(0.0, 0.0), 0.0, o.plate_thickness);

  const double peg_top = o.plate_thickness + 0.012;
  append_mesh(m, cylinder(Vec2(0.035, 0.0), 0.0045, o.plate_thickness,
                          peg_top, 20));
  append_mesh(m, cylinder(Vec2(-0.035, 0.0), 0.0045, o.plate_thickness,
                          peg_top, 20));
  // Locating boss.
  append_mesh(m, cylinder(Vec2(-0.050, 0.030), 0.004, o.plate_thickness,
                          o.plate_thickness + 0.004, 16));
  return m;
}

Mesh gear1_mesh(const CatalogOptions& o) {
  Mesh m = toothed_ring({16, o.gear1_root_radius, o.gear1_tip_radius},
                        o.gear1_hole_radius, 0.0, o.gear1_thickness);
  // Four bosses make the gross shape 4-fold; stage 1 locks onto these.
  const double boss_orbit = 0.0105;
  for (int i = 0; i < 4; ++i) {
    append_mesh(m, cylinder(polar(boss_orbit, 90.0 * i), 0.0035,
                            o.gear1_thickness, o.gear1_thickness + 0.003, 16));
  }
  if (o.asymmetry_scale > 0.0) {
    // Locating pin between two bosses breaks the 4-fold symmetry. Footprint
    // and height both scale with the marker size; the height factor keeps the
    // depth step readable through sensor blur and quantization.
    append_mesh(m, cylinder(polar(boss_orbit, 45.0), 2.5 * o.asymmetry_scale,
                            o.gear1_thickness,
                            o.gear1_thickness +
                                kMarkerHeightFactor * o.asymmetry_scale,
                            16));
  }
  return m;
}

Mesh gear2_mesh(const CatalogOptions& o) {
  Mesh m = toothed_ring({16, o.gear2_root_radius, o.gear2_tip_radius},
                        o.gear2_hole_radius, 0.0, o.gear2_thickness);
  // Four bosses reduce the 16-tooth outline to true 4-fold symmetry.
  for (int i = 0; i < 4; ++i) {
    append_mesh(m, cylinder(polar(0.0125, 90.0 * i), 0.004, o.gear2_thickness,
                            o.gear2_thickness + 0.004, 16));
  }
  return m;
}

Mesh compound_gear_mesh(const CatalogOptions& o) {
  Mesh m = toothed_ring({36, o.compound_big_root_radius,
                         o.compound_big_tip_radius},
                        o.compound_hole_radius, 0.0, o.compound_big_thickness);
  append_mesh(m, toothed_ring({12, o.compound_top_root_radius,
                               o.compound_top_tip_radius},
                              o.compound_hole_radius, o.compound_big_thickness,
                              o.compound_big_thickness +
                                  o.compound_top_thickness));
  return m;
}

double planar_circumradius(const Mesh& m) {
  double best = 0.0;
  for (const Vec3& v : m.vertices) {
    best = std::max(best, std::hypot(v.x(), v.y()));
  }
  return best;
}

RigidTransform default_grasp(double top_height) {
  // Tool z points down at the part, hovering above the top surface.
  RigidTransform g;
  g.R << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  g.t = Vec3(0.0, 0.0, top_height + 0.020);
  return g;
}

}  // namespace

std::string_view to_string(PartClass c) {
  switch (c) {
    case PartClass::BasePlate: return "base_plate";
    case PartClass::Shaft1: return "shaft_1";
    case PartClass::Shaft2: return "shaft_2";
    case PartClass::CompoundGear: return "compound_gear";
    case PartClass::Gear1: return "gear_1";
    case PartClass::Gear2: return "gear_2";
  }
  throw std::invalid_argument("to_string: bad PartClass");
}

PartClass part_class_from_string(std::string_view name) {
  for (int i = 0; i < kPartClassCount; ++i) {
    const auto c = static_cast<PartClass>(i);
    if (to_string(c) == name) return c;
  }
  throw std::invalid_argument("part_class_from_string: unknown class '" +
                              std::string(name) + "'");
}

Mesh generate_mesh(PartClass c, const CatalogOptions& o) {
  switch (c) {
    case PartClass::BasePlate: return base_plate_mesh(o);
    case PartClass::Shaft1:
      return lying_shaft(o.shaft1_length, o.shaft1_mid_radius,
                         o.shaft1_end_radius, o.shaft1_end_length,
                         o.asymmetry_scale);
    case PartClass::Shaft2:
      return lying_shaft(o.shaft2_length, o.shaft2_mid_radius,
                         o.shaft2_end_radius, o.shaft2_end_length,
                         o.asymmetry_scale);
    case PartClass::CompoundGear: return compound_gear_mesh(o);
    case PartClass::Gear1: return gear1_mesh(o);
    case PartClass::Gear2: return gear2_mesh(o);
  }
  throw std::invalid_argument("generate_mesh: bad PartClass");
}

std::vector<PartSpec> builtin_catalog(const CatalogOptions& o) {
  std::vector<PartSpec> catalog(kPartClassCount);

  auto init = [&](PartClass c, int order, int subclasses, double asym,
                  std::optional<Insertion> ins, double top_height,
                  const RigidTransform& target) {
    PartSpec& p = catalog[static_cast<std::size_t>(c)];
    p.class_id = c;
    p.symmetry_order = order;
    p.subclass_count = subclasses;
    p.angular_domain_deg = 360.0 / (order * subclasses);
    p.asymmetry_scale = asym;
    p.mesh = generate_mesh(c, o);
    p.bounding_radius = planar_circumradius(p.mesh);
    p.insertion = ins;
    p.grasp_in_part = default_grasp(top_height);
    p.target_in_plate = target;
  };

  const double a = o.asymmetry_scale;
  const double marker = kMarkerHeightFactor * a;
  const double plate_top = o.plate_thickness + 0.012;
  init(PartClass::BasePlate, 1, 1, 0.0, std::nullopt,
       plate_top, RigidTransform{});
  init(PartClass::Shaft1, 1, 2, a, Insertion{0.0040, o.shaft1_end_radius},
       2.0 * o.shaft1_mid_radius + marker,
       translation(Vec3(0.0, -0.035, o.shaft1_mid_radius)));
  init(PartClass::Shaft2, 1, 2, a, Insertion{0.0030, o.shaft2_end_radius},
       2.0 * o.shaft2_mid_radius + marker,
       translation(Vec3(0.0, 0.035, o.shaft2_mid_radius)));
  init(PartClass::CompoundGear, 12, 1, 0.0,
       Insertion{o.compound_hole_radius, 0.0045},
       o.compound_big_thickness + o.compound_top_thickness,
       translation(Vec3(0.035, 0.0, o.plate_thickness + 0.012)));
  init(PartClass::Gear1, 1, 4, a, Insertion{o.gear1_hole_radius, 0.0045},
       o.gear1_thickness + std::max(0.003, marker),
       translation(Vec3(-0.035, 0.0, o.plate_thickness + 0.012)));
  init(PartClass::Gear2, 4, 1, 0.0, Insertion{o.gear2_hole_radius, 0.0045},
       o.gear2_thickness + 0.004,
       translation(Vec3(0.035, 0.0, o.plate_thickness + 0.028)));

  for (int i = 0; i < kPartClassCount; ++i) {
    if (o.insertion_override[i]) catalog[static_cast<std::size_t>(i)].insertion = o.insertion_override[i];
    if (o.grasp_override[i]) catalog[static_cast<std::size_t>(i)].grasp_in_part = *o.grasp_override[i];
    if (o.target_override[i]) catalog[static_cast<std::size_t>(i)].target_in_plate = *o.target_override[i];
  }
  return catalog;
}

namespace {

RigidTransform parse_transform(const std::string& text,
                               const std::string& key) {
  std::istringstream in(text);
  std::array<double, 12> v{};
  for (double& x : v) {
    if (!(in >> x)) {
      throw std::invalid_argument(key + ": expected 12 row-major numbers");
    }
  }
  std::string extra;
  if (in >> extra) {
    throw std::invalid_argument(key + ": expected exactly 12 numbers");
  }
  RigidTransform t;
  t.R << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
  t.t = Vec3(v[3], v[7], v[11]);
  return t;
}

}  // namespace

CatalogOptions catalog_options_from(const ConfigFile& cfg) {
  CatalogOptions o;
  const std::pair<const char*, double CatalogOptions::*> dims[] = {
      {"asymmetry_scale", &CatalogOptions::asymmetry_scale},
      {"gear1_tip_radius", &CatalogOptions::gear1_tip_radius},
      {"gear1_root_radius", &CatalogOptions::gear1_root_radius},
      {"gear1_thickness", &CatalogOptions::gear1_thickness},
      {"gear1_hole_radius", &CatalogOptions::gear1_hole_radius},
      {"gear2_tip_radius", &CatalogOptions::gear2_tip_radius},
      {"gear2_root_radius", &CatalogOptions::gear2_root_radius},
      {"gear2_thickness", &CatalogOptions::gear2_thickness},
      {"gear2_hole_radius", &CatalogOptions::gear2_hole_radius},
      {"compound_big_tip_radius", &CatalogOptions::compound_big_tip_radius},
      {"compound_big_root_radius", &CatalogOptions::compound_big_root_radius},
      {"compound_big_thickness", &CatalogOptions::compound_big_thickness},
      {"compound_top_tip_radius", &CatalogOptions::compound_top_tip_radius},
      {"compound_top_root_radius", &CatalogOptions::compound_top_root_radius},
      {"compound_top_thickness", &CatalogOptions::compound_top_thickness},
      {"compound_hole_radius", &CatalogOptions::compound_hole_radius},
      {"shaft1_length", &CatalogOptions::shaft1_length},
      {"shaft1_mid_radius", &CatalogOptions::shaft1_mid_radius},
      {"shaft1_end_radius", &CatalogOptions::shaft1_end_radius},
      {"shaft1_end_length", &CatalogOptions::shaft1_end_length},
      {"shaft2_length", &CatalogOptions::shaft2_length},
      {"shaft2_mid_radius", &CatalogOptions::shaft2_mid_radius},
      {"shaft2_end_radius", &CatalogOptions::shaft2_end_radius},
      {"shaft2_end_length", &CatalogOptions::shaft2_end_length},
      {"plate_size_x", &CatalogOptions::plate_size_x},
      {"plate_size_y", &CatalogOptions::plate_size_y},
      {"plate_thickness", &CatalogOptions::plate_thickness},
  };
  for (const auto& [name, field] : dims) {
    o.*field = cfg.get_double(std::string("catalog.") + name, o.*field);
  }

  for (int i = 0; i < kPartClassCount; ++i) {
    const auto c = static_cast<PartClass>(i);
    const std::string base = "catalog." + std::string(to_string(c));
    const std::string hole_key = base + "_hole_radius";
    const std::string peg_key = base + "_peg_radius";
    if (cfg.has(hole_key) != cfg.has(peg_key)) {
      throw std::invalid_argument("insertion override needs both " + hole_key +
                                  " and " + peg_key);
    }
    if (cfg.has(hole_key)) {
      o.insertion_override[i] = Insertion{cfg.get_double(hole_key, 0.0),
                                          cfg.get_double(peg_key, 0.0)};
    }
    if (cfg.has(base + "_grasp")) {
      o.grasp_override[i] =
          parse_transform(cfg.get_string(base + "_grasp", ""), base + "_grasp");
    }
    if (cfg.has(base + "_target")) {
      o.target_override[i] = parse_transform(
          cfg.get_string(base + "_target", ""), base + "_target");
    }
  }
  return o;
}

const PartSpec& find_part(const std::vector<PartSpec>& catalog, PartClass c) {
  for (const PartSpec& p : catalog) {
    if (p.class_id == c) return p;
  }
  throw std::invalid_argument("find_part: class not in catalog");
}

double fixed_bbox_px(const PartSpec& part, const CameraIntrinsics& k,
                     double height_m) {
  if (!(height_m > 0.0)) {
    throw std::invalid_argument("fixed_bbox_px: height must be positive");
  }
  return 2.0 * part.bounding_radius * k.fx / height_m;
}

}  // namespace gearpose
