#pragma once

#include "geometry.hpp"
#include "matching.hpp"

#include <span>
#include <vector>

namespace linteg {

using RowJacobian = Eigen::Matrix<double, 1, 6>;
using JacobianMatrix = Eigen::Matrix<double, Eigen::Dynamic, 6>;

enum class Endpoint { Start = 0, End = 1 };

// Stacked linearization, two rows per correspondence (start, end endpoint).
// residuals[i] is the signed distance of the projected endpoint to the
// detected line, i.e. prediction minus measurement; the shifted measurement
// of the linear model is -residuals.
struct LinearizedSystem {
  JacobianMatrix jacobian;
  Eigen::VectorXd residuals;
  Eigen::VectorXd weights;
  std::vector<int> row_owner;
  // Correspondences dropped because an endpoint fell behind the camera.
  std::vector<int> dropped_ids;

  Eigen::Index rows() const { return residuals.size(); }
  Eigen::Index line_count() const { return residuals.size() / 2; }
  Eigen::Matrix<double, 6, 6> normal_matrix() const;
};

struct SolveOptions {
  int max_iterations = 50;
  double step_tolerance = 1e-8;
  double initial_lambda = 1e-4;
  double lambda_factor = 10.0;
  double max_lambda = 1e12;
  // Normal equations with a larger condition number are rejected.
  double singular_condition = 1e14;
};

struct SolveReport {
  Pose pose;
  int iterations = 0;
  bool converged = false;
  double final_cost = 0.0;
  double last_step_norm = 0.0;
  LinearizedSystem final_system;
  // Cost after every accepted iteration, starting with the initial cost.
  std::vector<double> cost_history;
};

// Minimum number of correspondences for a solvable, testable system.
inline constexpr int kMinCorrespondences = 4;

double endpoint_residual(const Correspondence& corr, Endpoint endpoint,
                         const Pose& pose_wc, const CameraIntrinsics& k);

// d(residual)/d(delta xi) under left perturbation, columns [rho; phi].
RowJacobian endpoint_jacobian(const Correspondence& corr, Endpoint endpoint,
                              const Pose& pose_wc, const CameraIntrinsics& k);

// Jacobian of the squared foot-point error e = |p_f - p|^2 written with the
// m, n coefficients and the closed-form columns J1..J6. Equals
// 2 * r * endpoint_jacobian().
RowJacobian foot_point_error_jacobian(const Correspondence& corr,
                                      Endpoint endpoint, const Pose& pose_wc,
                                      const CameraIntrinsics& k);

// Same quantity as the product of its three chain-rule factors: de/dp,
// dp/dP' (carrying the leading minus sign), dP'/d(delta xi).
RowJacobian foot_point_error_jacobian_chain(const Correspondence& corr,
                                            Endpoint endpoint,
                                            const Pose& pose_wc,
                                            const CameraIntrinsics& k);

// Throws InsufficientObservations when fewer than kMinCorrespondences
// survive the depth cull.
LinearizedSystem assemble_system(std::span<const Correspondence> correspondences,
                                 const Pose& pose_wc, const CameraIntrinsics& k,
                                 double sigma_px);

// Gauss-Newton with a Levenberg fallback whenever the plain step raises the
// cost. Throws SingularNormalEquations on degenerate geometry.
SolveReport gauss_newton_solve(std::span<const Correspondence> correspondences,
                               const Pose& initial, const CameraIntrinsics& k,
                               double sigma_px, const SolveOptions& opts = {});

double weighted_cost(const LinearizedSystem& system);

// Condition number of the normal matrix; +inf when not positive definite.
double normal_condition(const LinearizedSystem& system);

}  // namespace linteg
