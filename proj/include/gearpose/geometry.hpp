#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <stdexcept>

namespace gearpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Wraps an angle in degrees to [0, 360).
inline double normalize_degrees(double deg) {
  double a = std::fmod(deg, 360.0);
  if (a < 0.0) a += 360.0;
  if (a == 360.0) a = 0.0;
  return a;
}

constexpr double deg_to_rad(double deg) {
  return deg * (3.141592653589793238462643383279502884 / 180.0);
}

constexpr double rad_to_deg(double rad) {
  return rad * (180.0 / 3.141592653589793238462643383279502884);
}

/// Planar pose on the table: position in meters, yaw in degrees CCW viewed
/// from above, normalized to [0, 360).
struct PlanarPose {
  double x = 0.0;
  double y = 0.0;
  double theta_deg = 0.0;

  static PlanarPose make(double x, double y, double theta_deg) {
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(theta_deg)) {
      throw std::invalid_argument("PlanarPose: non-finite component");
    }
    return PlanarPose{x, y, normalize_degrees(theta_deg)};
  }
};

/// Rigid body transform: p_out = R * p_in + t.
struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.block<3, 3>(0, 0) = R;
    m.block<3, 1>(0, 3) = t;
    return m;
  }
};

inline Vec3 apply(const RigidTransform& T, const Vec3& p) {
  return T.R * p + T.t;
}

inline RigidTransform compose(const RigidTransform& a,
                              const RigidTransform& b) {
  return RigidTransform{a.R * b.R, a.R * b.t + a.t};
}

inline RigidTransform invert(const RigidTransform& T) {
  RigidTransform inv;
  inv.R = T.R.transpose();
  inv.t = -(inv.R * T.t);
  return inv;
}

inline bool is_rigid(const RigidTransform& T, double tol = 1e-9) {
  const Mat3 err = T.R.transpose() * T.R - Mat3::Identity();
  return err.cwiseAbs().maxCoeff() <= tol && std::abs(T.R.determinant() - 1.0) <= tol &&
         T.t.allFinite();
}

inline RigidTransform translation(const Vec3& t) {
  return RigidTransform{Mat3::Identity(), t};
}

inline RigidTransform rot_x_deg(double deg) {
  RigidTransform T;
  T.R = Eigen::AngleAxisd(deg_to_rad(deg), Vec3::UnitX()).toRotationMatrix();
  return T;
}

inline RigidTransform rot_y_deg(double deg) {
  RigidTransform T;
  T.R = Eigen::AngleAxisd(deg_to_rad(deg), Vec3::UnitY()).toRotationMatrix();
  return T;
}

inline RigidTransform rot_z_deg(double deg) {
  RigidTransform T;
  T.R = Eigen::AngleAxisd(deg_to_rad(deg), Vec3::UnitZ()).toRotationMatrix();
  return T;
}

/// Embeds a planar pose as a rigid transform: yaw about +z, origin lifted to
/// the given height.
inline RigidTransform planar_to_rigid(const PlanarPose& pose, double z = 0.0) {
  RigidTransform T = rot_z_deg(pose.theta_deg);
  T.t = Vec3(pose.x, pose.y, z);
  return T;
}

/// Extracts (x, y, theta) from a transform whose rotation is a pure yaw.
inline PlanarPose planar_from_rigid(const RigidTransform& T) {
  const double theta = rad_to_deg(std::atan2(T.R(1, 0), T.R(0, 0)));
  return PlanarPose::make(T.t.x(), T.t.y(), theta);
}

/// Pinhole camera. Pixel centers sit at integer coordinates; the principal
/// point of a symmetric sensor is ((width-1)/2, (height-1)/2).
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
};

/// Intrinsics from a horizontal field of view, square pixels.
inline CameraIntrinsics intrinsics_from_hfov(int width, int height,
                                             double hfov_deg) {
  if (width <= 0 || height <= 0 || hfov_deg <= 0.0 || hfov_deg >= 180.0) {
    throw std::invalid_argument("intrinsics_from_hfov: bad arguments");
  }
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  k.fx = (width / 2.0) / std::tan(deg_to_rad(hfov_deg / 2.0));
  k.fy = k.fx;
  k.cx = (width - 1) / 2.0;
  k.cy = (height - 1) / 2.0;
  return k;
}

/// Camera frame point -> pixel coordinates. Requires z > 0.
inline Vec2 project(const Vec3& p, const CameraIntrinsics& k) {
  if (!(p.z() > 0.0)) {
    throw std::invalid_argument("project: point not in front of camera");
  }
  return Vec2(k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy);
}

/// Pixel + depth (camera-frame z, meters) -> camera frame point.
/// Requires depth > 0.
inline Vec3 deproject(const Vec2& px, double depth,
                      const CameraIntrinsics& k) {
  if (!(depth > 0.0)) {
    throw std::invalid_argument("deproject: depth must be positive");
  }
  return Vec3((px.x() - k.cx) * depth / k.fx, (px.y() - k.cy) * depth / k.fy,
              depth);
}

/// Camera-to-world pose of a downward-looking camera at (x, y, height).
/// Camera x aligns with world x at yaw 0; camera z points at the table. A
/// part with yaw theta appears in the image at angle theta - yaw_deg
/// (measured CCW with image y up).
inline RigidTransform top_down_camera(double x, double y, double height,
                                      double yaw_deg = 0.0) {
  Mat3 flip;
  flip << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  RigidTransform T;
  T.R = rot_z_deg(yaw_deg).R * flip;
  T.t = Vec3(x, y, height);
  return T;
}

}  // namespace gearpose
