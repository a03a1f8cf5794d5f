#include "estimator.hpp"

#include "error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace linteg {

namespace {

const Vec3& endpoint_of(const Correspondence& corr, Endpoint endpoint) {
  return endpoint == Endpoint::Start ? corr.map_segment.p_start
                                     : corr.map_segment.p_end;
}

// Plain pinhole partials d(u,v)/d(X',Y',Z').
Eigen::Matrix<double, 2, 3> pinhole_partials(const CameraIntrinsics& k,
                                             const Vec3& pc) {
  const double iz = 1.0 / pc.z();
  const double iz2 = iz * iz;
  Eigen::Matrix<double, 2, 3> d;
  d << k.fx * iz, 0.0, -k.fx * pc.x() * iz2,  //
      0.0, k.fy * iz, -k.fy * pc.y() * iz2;
  return d;
}

// d(P')/d(delta xi) = [I | -P'^]
Eigen::Matrix<double, 3, 6> point_partials(const Vec3& pc) {
  Eigen::Matrix<double, 3, 6> d;
  d.leftCols<3>().setIdentity();
  d.rightCols<3>() = -skew(pc);
  return d;
}

Vec3 camera_point_checked(const Correspondence& corr, Endpoint endpoint,
                          const Pose& pose_wc) {
  const Vec3 pc = to_camera(pose_wc, endpoint_of(corr, endpoint));
  if (!(pc.z() > kDepthEpsilon)) {
    throw Error(ErrorCode::BehindCamera,
                "map line " + std::to_string(corr.map_line_id) +
                    " endpoint is behind the camera");
  }
  return pc;
}

std::optional<double> try_cost(std::span<const Correspondence> corrs,
                               const Pose& pose_wc, const CameraIntrinsics& k,
                               double weight) {
  double cost = 0.0;
  for (const auto& c : corrs) {
    for (Endpoint e : {Endpoint::Start, Endpoint::End}) {
      const Vec3 pc = to_camera(pose_wc, endpoint_of(c, e));
      if (!(pc.z() > kDepthEpsilon)) return std::nullopt;
      const double r =
          signed_distance(c.detected_line, project_camera_point(k, pc));
      cost += weight * r * r;
    }
  }
  return cost;
}

}  // namespace

Eigen::Matrix<double, 6, 6> LinearizedSystem::normal_matrix() const {
  return jacobian.transpose() * weights.asDiagonal() * jacobian;
}

double endpoint_residual(const Correspondence& corr, Endpoint endpoint,
                         const Pose& pose_wc, const CameraIntrinsics& k) {
  const Vec3 pc = camera_point_checked(corr, endpoint, pose_wc);
  return signed_distance(corr.detected_line, project_camera_point(k, pc));
}

RowJacobian endpoint_jacobian(const Correspondence& corr, Endpoint endpoint,
                              const Pose& pose_wc, const CameraIntrinsics& k) {
  const Vec3 pc = camera_point_checked(corr, endpoint, pose_wc);
  const Eigen::RowVector2d dr_dp(corr.detected_line.a, corr.detected_line.b);
  return dr_dp * pinhole_partials(k, pc) * point_partials(pc);
}

RowJacobian foot_point_error_jacobian(const Correspondence& corr,
                                      Endpoint endpoint, const Pose& pose_wc,
                                      const CameraIntrinsics& k) {
  const Vec3 pc = camera_point_checked(corr, endpoint, pose_wc);
  const Line2D& l = corr.detected_line;
  const Vec2 p = project_camera_point(k, pc);
  const Vec2 pf = foot_point(l, p);
  const double A = l.a;
  const double B = l.b;
  const double m = A * A * (pf.x() - p.x()) + A * B * (pf.y() - p.y());
  const double n = A * B * (pf.x() - p.x()) + B * B * (pf.y() - p.y());
  const double X = pc.x();
  const double Y = pc.y();
  const double Z = pc.z();
  const double Z2 = Z * Z;
  const double mixed = (m * k.fx * X + n * k.fy * Y) / Z2;

  RowJacobian j;
  j(0) = m * k.fx / Z;
  j(1) = n * k.fy / Z;
  j(2) = -mixed;
  j(3) = -n * k.fy - mixed * Y;
  j(4) = m * k.fx + mixed * X;
  // Rotation about the optical axis: -fx*Y'/Z' and fy*X'/Z' pixel rates.
  j(5) = -m * k.fx * Y / Z + n * k.fy * X / Z;
  return -2.0 / (A * A + B * B) * j;
}

RowJacobian foot_point_error_jacobian_chain(const Correspondence& corr,
                                            Endpoint endpoint,
                                            const Pose& pose_wc,
                                            const CameraIntrinsics& k) {
  const Vec3 pc = camera_point_checked(corr, endpoint, pose_wc);
  const Line2D& l = corr.detected_line;
  const Vec2 p = project_camera_point(k, pc);
  const Vec2 pf = foot_point(l, p);
  const double A = l.a;
  const double B = l.b;
  const double du = pf.x() - p.x();
  const double dv = pf.y() - p.y();
  const Eigen::RowVector2d de_dp =
      2.0 / (A * A + B * B) *
      Eigen::RowVector2d(A * A * du + A * B * dv, A * B * du + B * B * dv);
  const Eigen::Matrix<double, 2, 3> dp_dP = -pinhole_partials(k, pc);
  return de_dp * dp_dP * point_partials(pc);
}

LinearizedSystem assemble_system(std::span<const Correspondence> correspondences,
                                 const Pose& pose_wc, const CameraIntrinsics& k,
                                 double sigma_px) {
  if (!(sigma_px > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "sigma_px must be positive");
  }
  std::vector<const Correspondence*> kept;
  LinearizedSystem sys;
  for (const auto& c : correspondences) {
    const double zs = to_camera(pose_wc, c.map_segment.p_start).z();
    const double ze = to_camera(pose_wc, c.map_segment.p_end).z();
    if (zs > kDepthEpsilon && ze > kDepthEpsilon) {
      kept.push_back(&c);
    } else {
      sys.dropped_ids.push_back(c.map_line_id);
    }
  }
  if (kept.size() < static_cast<std::size_t>(kMinCorrespondences)) {
    throw Error(ErrorCode::InsufficientObservations,
                std::to_string(kept.size()) +
                    " usable correspondences, need at least " +
                    std::to_string(kMinCorrespondences));
  }
  const Eigen::Index n = 2 * static_cast<Eigen::Index>(kept.size());
  sys.jacobian.resize(n, 6);
  sys.residuals.resize(n);
  sys.weights = Eigen::VectorXd::Constant(n, 1.0 / (sigma_px * sigma_px));
  sys.row_owner.reserve(n);
  Eigen::Index row = 0;
  for (const Correspondence* c : kept) {
    for (Endpoint e : {Endpoint::Start, Endpoint::End}) {
      sys.residuals(row) = endpoint_residual(*c, e, pose_wc, k);
      sys.jacobian.row(row) = endpoint_jacobian(*c, e, pose_wc, k);
      sys.row_owner.push_back(c->map_line_id);
      ++row;
    }
  }
  return sys;
}

double weighted_cost(const LinearizedSystem& system) {
  return (system.residuals.array().square() * system.weights.array()).sum();
}

double normal_condition(const LinearizedSystem& system) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(
      system.normal_matrix(), Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(5);
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

SolveReport gauss_newton_solve(std::span<const Correspondence> correspondences,
                               const Pose& initial, const CameraIntrinsics& k,
                               double sigma_px, const SolveOptions& opts) {
  LinearizedSystem sys = assemble_system(correspondences, initial, k, sigma_px);

  // The observation set is frozen at the initial pose so costs stay
  // comparable across iterations.
  std::vector<Correspondence> active;
  for (const auto& c : correspondences) {
    if (std::find(sys.dropped_ids.begin(), sys.dropped_ids.end(),
                  c.map_line_id) == sys.dropped_ids.end()) {
      active.push_back(c);
    }
  }
  const std::vector<int> dropped = sys.dropped_ids;
  const double weight = 1.0 / (sigma_px * sigma_px);

  SolveReport report;
  report.pose = initial;
  double cost = weighted_cost(sys);
  report.cost_history.push_back(cost);

  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    report.iterations = iter;
    const Eigen::Matrix<double, 6, 6> H = sys.normal_matrix();
    const Vec6 g = sys.jacobian.transpose() * sys.weights.asDiagonal() *
                   sys.residuals;
    const double cond = normal_condition(sys);
    if (!(cond <= opts.singular_condition)) {
      throw Error(ErrorCode::SingularNormalEquations,
                  "normal equations condition number " + std::to_string(cond) +
                      " exceeds limit");
    }

    Vec6 step = -H.ldlt().solve(g);
    double step_norm = step.norm();
    Pose candidate = apply_left_perturbation(report.pose, Twist::from_vector(step));
    std::optional<double> candidate_cost = try_cost(active, candidate, k, weight);

    bool accepted = candidate_cost && *candidate_cost <= cost;
    if (!accepted && step_norm < opts.step_tolerance) {
      // Already at the minimum to working precision.
      report.last_step_norm = step_norm;
      report.converged = true;
      break;
    }
    for (double lambda = opts.initial_lambda; !accepted && lambda <= opts.max_lambda;
         lambda *= opts.lambda_factor) {
      Eigen::Matrix<double, 6, 6> damped = H;
      damped.diagonal() *= (1.0 + lambda);
      step = -damped.ldlt().solve(g);
      step_norm = step.norm();
      candidate = apply_left_perturbation(report.pose, Twist::from_vector(step));
      candidate_cost = try_cost(active, candidate, k, weight);
      accepted = candidate_cost && *candidate_cost <= cost;
    }
    report.last_step_norm = step_norm;
    if (!accepted) break;

    report.pose = candidate;
    cost = *candidate_cost;
    report.cost_history.push_back(cost);
    sys = assemble_system(active, report.pose, k, sigma_px);
    if (step_norm < opts.step_tolerance) {
      report.converged = true;
      break;
    }
  }

  report.final_system = assemble_system(active, report.pose, k, sigma_px);
  report.final_system.dropped_ids = dropped;
  report.final_cost = weighted_cost(report.final_system);
  return report;
}

}  // namespace linteg
