#include "geometry.hpp"

#include "error.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace linteg {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::DegenerateSegment: return "DegenerateSegment";
    case ErrorCode::InsufficientObservations: return "InsufficientObservations";
    case ErrorCode::SingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::IntegrityUnavailable: return "IntegrityUnavailable";
    case ErrorCode::NoVisibleLines: return "NoVisibleLines";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::DomainError: return "DomainError";
  }
  return "Unknown";
}

Pose Pose::from_matrix(const Mat3& rotation, const Vec3& translation) {
  Pose pose;
  pose.rotation = Eigen::Quaterniond(rotation).normalized();
  pose.translation = translation;
  return pose;
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.conjugate();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

Pose Pose::operator*(const Pose& rhs) const {
  Pose out;
  out.rotation = rotation * rhs.rotation;
  // renormalize only on real drift so that composing with identity is exact
  if (std::abs(out.rotation.squaredNorm() - 1.0) > 1e-12) out.rotation.normalize();
  out.translation = rotation * rhs.translation + translation;
  return out;
}

Vec6 Twist::vector() const {
  Vec6 v;
  v << rho, phi;
  return v;
}

Twist Twist::from_vector(const Vec6& v) {
  return {v.head<3>(), v.tail<3>()};
}

void CameraIntrinsics::validate() const {
  std::ostringstream why;
  if (!(fx > 0.0)) why << "fx must be positive; ";
  if (!(fy > 0.0)) why << "fy must be positive; ";
  if (width <= 0 || height <= 0) why << "image size must be positive; ";
  if (!(cx >= 0.0 && cx <= width)) why << "cx outside image; ";
  if (!(cy >= 0.0 && cy <= height)) why << "cy outside image; ";
  const std::string msg = why.str();
  if (!msg.empty()) {
    throw Error(ErrorCode::InvariantViolation, "camera intrinsics: " + msg);
  }
}

bool CameraIntrinsics::contains(const Vec2& pixel) const {
  return pixel.x() >= 0.0 && pixel.x() <= width && pixel.y() >= 0.0 &&
         pixel.y() <= height;
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<     0.0, -v.z(),  v.y(),
         v.z(),    0.0, -v.x(),
        -v.y(),  v.x(),    0.0;
  // clang-format on
  return s;
}

Mat3 so3_exp(const Vec3& phi) {
  const double theta = phi.norm();
  if (theta < 1e-12) {
    return Mat3::Identity() + skew(phi);
  }
  return Eigen::AngleAxisd(theta, phi / theta).toRotationMatrix();
}

namespace {

Vec3 quaternion_log(Eigen::Quaterniond q) {
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 v = q.vec();
  const double n = v.norm();
  if (n < 1e-12) {
    // theta / sin(theta/2) -> 2 / w for small angles
    return 2.0 * v / q.w();
  }
  const double theta = 2.0 * std::atan2(n, q.w());
  return theta / n * v;
}

}  // namespace

Vec3 so3_log(const Mat3& rotation) {
  return quaternion_log(Eigen::Quaterniond(rotation));
}

Mat3 so3_left_jacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 phi_hat = skew(phi);
  if (theta < 1e-6) {
    return Mat3::Identity() + 0.5 * phi_hat + phi_hat * phi_hat / 6.0;
  }
  const double t2 = theta * theta;
  return Mat3::Identity() + (1.0 - std::cos(theta)) / t2 * phi_hat +
         (theta - std::sin(theta)) / (t2 * theta) * phi_hat * phi_hat;
}

Mat3 so3_left_jacobian_inverse(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 phi_hat = skew(phi);
  if (theta < 1e-6) {
    return Mat3::Identity() - 0.5 * phi_hat + phi_hat * phi_hat / 12.0;
  }
  const double half = 0.5 * theta;
  const double coeff =
      (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
  return Mat3::Identity() - 0.5 * phi_hat + coeff * phi_hat * phi_hat;
}

Pose exp_map(const Twist& xi) {
  Pose pose;
  const double theta = xi.phi.norm();
  if (theta < 1e-12) {
    pose.rotation = Eigen::Quaterniond(Mat3::Identity() + skew(xi.phi));
    pose.rotation.normalize();
  } else {
    pose.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(theta, xi.phi / theta));
  }
  pose.translation = so3_left_jacobian(xi.phi) * xi.rho;
  return pose;
}

Twist log_map(const Pose& pose) {
  Twist xi;
  xi.phi = quaternion_log(pose.rotation);
  xi.rho = so3_left_jacobian_inverse(xi.phi) * pose.translation;
  return xi;
}

Pose apply_left_perturbation(const Pose& pose, const Twist& delta) {
  return exp_map(delta) * pose;
}

Pose world_to_camera(const Pose& pose_wb, const Pose& extrinsic_bc) {
  return extrinsic_bc * pose_wb;
}

Vec3 to_camera(const Pose& pose_wc, const Vec3& p_world) {
  return pose_wc.transform(p_world);
}

Vec2 project_camera_point(const CameraIntrinsics& k, const Vec3& pc) {
  if (!(pc.z() > kDepthEpsilon)) {
    throw Error(ErrorCode::BehindCamera, "point depth " +
                                             std::to_string(pc.z()) +
                                             " m is not in front of camera");
  }
  return {k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy};
}

Vec2 project(const Pose& pose_wc, const CameraIntrinsics& k,
             const Vec3& p_world) {
  return project_camera_point(k, to_camera(pose_wc, p_world));
}

Line2D normalized(const Line2D& line) {
  Line2D out = line;
  const double norm = std::hypot(line.a, line.b);
  if (!(norm > 0.0)) {
    throw Error(ErrorCode::DegenerateSegment, "line has zero normal");
  }
  if (std::abs(norm - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) {
    out.a /= norm;
    out.b /= norm;
    out.c /= norm;
  }
  bool flip = false;
  if (out.c > 0.0) {
    flip = true;
  } else if (out.c == 0.0) {
    flip = out.a < 0.0 || (out.a == 0.0 && out.b < 0.0);
  }
  if (flip) {
    out.a = -out.a;
    out.b = -out.b;
    out.c = -out.c;
  }
  // avoid negative zeros leaking into outputs
  out.a += 0.0;
  out.b += 0.0;
  out.c += 0.0;
  return out;
}

Line2D line_from_endpoints(const Vec2& p1, const Vec2& p2) {
  const Vec2 d = p2 - p1;
  if (d.norm() <= 1e-9) {
    throw Error(ErrorCode::DegenerateSegment,
                "line endpoints coincide within 1e-9 px");
  }
  Line2D line;
  line.a = d.y();
  line.b = -d.x();
  // anchor the offset at the midpoint so both endpoints sit on the line to
  // rounding error of the same magnitude
  const Vec2 mid = 0.5 * (p1 + p2);
  line.c = -(line.a * mid.x() + line.b * mid.y());
  line.p_start = p1;
  line.p_end = p2;
  return normalized(line);
}

Vec2 foot_point(const Line2D& line, const Vec2& p) {
  const double a = line.a;
  const double b = line.b;
  const double c = line.c;
  const double denom = a * a + b * b;
  return {(b * b * p.x() - a * b * p.y() - a * c) / denom,
          (a * a * p.y() - a * b * p.x() - b * c) / denom};
}

double signed_distance(const Line2D& line, const Vec2& p) {
  return line.a * p.x() + line.b * p.y() + line.c;
}

std::optional<LineSegment3D> clip_to_view(const LineSegment3D& segment,
                                          const Pose& pose_wc,
                                          const CameraIntrinsics& k) {
  const Vec3 c0 = to_camera(pose_wc, segment.p_start);
  const Vec3 c1 = to_camera(pose_wc, segment.p_end);
  const double w = k.width;
  const double h = k.height;
  // Each constraint g(P) >= 0 is affine in the camera point.
  auto constraints = [&](const Vec3& p) {
    return std::array<double, 5>{
        p.z() - kClipNearPlane,
        k.fx * p.x() + k.cx * p.z(),
        (w - k.cx) * p.z() - k.fx * p.x(),
        k.fy * p.y() + k.cy * p.z(),
        (h - k.cy) * p.z() - k.fy * p.y(),
    };
  };
  const auto g0 = constraints(c0);
  const auto g1 = constraints(c1);
  double lo = 0.0;
  double hi = 1.0;
  for (std::size_t i = 0; i < g0.size(); ++i) {
    if (g0[i] >= 0.0 && g1[i] >= 0.0) continue;
    if (g0[i] < 0.0 && g1[i] < 0.0) return std::nullopt;
    const double t = g0[i] / (g0[i] - g1[i]);
    if (g0[i] < 0.0) {
      lo = std::max(lo, t);
    } else {
      hi = std::min(hi, t);
    }
  }
  if (hi - lo <= 1e-9) return std::nullopt;
  LineSegment3D out = segment;
  const Vec3 d = segment.p_end - segment.p_start;
  out.p_start = segment.p_start + lo * d;
  out.p_end = segment.p_start + hi * d;
  return out;
}

}  // namespace linteg
