#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>

namespace linteg {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Minimum camera-frame depth (meters) for a point to be projected.
inline constexpr double kDepthEpsilon = 1e-6;
// Near plane used when clipping map segments to the view.
inline constexpr double kClipNearPlane = 0.05;

// Rigid transform; in this library always world -> camera unless stated.
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  static Pose from_matrix(const Mat3& rotation, const Vec3& translation);

  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }
  Mat4 matrix() const;
  Vec3 transform(const Vec3& p) const { return rotation * p + translation; }
  Pose inverse() const;

  // (*this) * rhs: apply rhs first.
  Pose operator*(const Pose& rhs) const;
};

// Tangent vector [rho; phi] on SE(3).
struct Twist {
  Vec3 rho = Vec3::Zero();
  Vec3 phi = Vec3::Zero();

  Vec6 vector() const;
  static Twist from_vector(const Vec6& v);
};

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  // Throws InvariantViolation.
  void validate() const;
  bool contains(const Vec2& pixel) const;
};

// General-form line a*u + b*v + c = 0, stored normalized (a^2 + b^2 = 1)
// with c <= 0, or a > 0 (resp. a = 0, b > 0) when c = 0.
struct Line2D {
  double a = 0.0;
  double b = 1.0;
  double c = 0.0;
  Vec2 p_start = Vec2::Zero();
  Vec2 p_end = Vec2::UnitX();

  Vec2 normal() const { return {a, b}; }
  Vec2 direction() const { return {-b, a}; }
  double length() const { return (p_end - p_start).norm(); }
};

struct LineSegment3D {
  int id = 0;
  Vec3 p_start = Vec3::Zero();
  Vec3 p_end = Vec3::UnitX();

  double length() const { return (p_end - p_start).norm(); }
};

Mat3 skew(const Vec3& v);

Mat3 so3_exp(const Vec3& phi);
Vec3 so3_log(const Mat3& rotation);
// Left Jacobian of SO(3), V(phi) in exp(xi) = [exp(phi) | V(phi) rho].
Mat3 so3_left_jacobian(const Vec3& phi);
Mat3 so3_left_jacobian_inverse(const Vec3& phi);

Pose exp_map(const Twist& xi);
Twist log_map(const Pose& pose);

// exp(delta) * pose.
Pose apply_left_perturbation(const Pose& pose, const Twist& delta);

// T_wc = T_bc * T_wb.
Pose world_to_camera(const Pose& pose_wb, const Pose& extrinsic_bc);

Vec3 to_camera(const Pose& pose_wc, const Vec3& p_world);

// Throws BehindCamera when the camera-frame depth is <= kDepthEpsilon.
Vec2 project(const Pose& pose_wc, const CameraIntrinsics& k,
             const Vec3& p_world);
Vec2 project_camera_point(const CameraIntrinsics& k, const Vec3& p_camera);

// Throws DegenerateSegment when the points are closer than 1e-9 px.
Line2D line_from_endpoints(const Vec2& p1, const Vec2& p2);
// Rescales to unit normal and applies the sign convention.
Line2D normalized(const Line2D& line);

Vec2 foot_point(const Line2D& line, const Vec2& p);
double signed_distance(const Line2D& line, const Vec2& p);

// Part of the segment that lies in front of the camera and projects inside
// the image. The constraints are linear in the segment parameter once
// multiplied through by depth, so the clip is exact.
std::optional<LineSegment3D> clip_to_view(const LineSegment3D& segment,
                                          const Pose& pose_wc,
                                          const CameraIntrinsics& k);

}  // namespace linteg
