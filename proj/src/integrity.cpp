#include "integrity.hpp"

#include "error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace linteg {

const char* axis_name(Axis axis) {
  switch (axis) {
    case Axis::X: return "x";
    case Axis::Y: return "y";
    case Axis::Z: return "z";
    case Axis::Roll: return "roll";
    case Axis::Pitch: return "pitch";
    case Axis::Yaw: return "yaw";
  }
  return "?";
}

void IntegrityConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0) || !(k_sigma > 0.0) || r_max < 1 ||
      min_lines < kMinCorrespondences) {
    throw Error(ErrorCode::InvariantViolation,
                "integrity config: need 0 < alpha < 1, k_sigma > 0, r_max >= 1, "
                "min_lines >= 4");
  }
}

double wsse(const LinearizedSystem& system) { return weighted_cost(system); }

double chi2_quantile(double p, int dof) {
  if (!(p > 0.0 && p < 1.0) || dof < 1) {
    throw Error(ErrorCode::DomainError,
                "chi2_quantile needs 0 < p < 1 and dof >= 1");
  }
  return 2.0 * boost::math::gamma_p_inv(0.5 * dof, p);
}

Eigen::Matrix<double, 6, 6> state_covariance(const LinearizedSystem& system) {
  const double cond = normal_condition(system);
  if (!(cond <= 1e14)) {
    throw Error(ErrorCode::SingularNormalEquations,
                "J^T W J is singular to working precision");
  }
  return system.normal_matrix().ldlt().solve(
      Eigen::Matrix<double, 6, 6>::Identity());
}

Eigen::MatrixXd projection_matrix(const LinearizedSystem& system) {
  const auto cov = state_covariance(system);
  return system.jacobian * cov * system.jacobian.transpose() *
         system.weights.asDiagonal();
}

Eigen::MatrixXd s_matrix(const LinearizedSystem& system) {
  const Eigen::Index n = system.rows();
  const Eigen::MatrixXd W = system.weights.asDiagonal();
  Eigen::MatrixXd S = W * (Eigen::MatrixXd::Identity(n, n) - projection_matrix(system));
  // symmetric in exact arithmetic
  return 0.5 * (S + S.transpose());
}

Eigen::MatrixXd d_matrix(const LinearizedSystem& system, Axis axis) {
  const auto cov = state_covariance(system);
  const Eigen::VectorXd u = system.weights.asDiagonal() * system.jacobian *
                            cov.col(static_cast<int>(axis));
  return u * u.transpose();
}

std::vector<int> line_ids(const LinearizedSystem& system) {
  std::vector<int> ids;
  for (std::size_t i = 0; i < system.row_owner.size(); i += 2) {
    ids.push_back(system.row_owner[i]);
  }
  return ids;
}

std::vector<Eigen::Index> rows_of_lines(const LinearizedSystem& system,
                                        std::span<const int> ids) {
  std::vector<Eigen::Index> rows;
  for (int id : ids) {
    bool found = false;
    for (std::size_t i = 0; i < system.row_owner.size(); i += 2) {
      if (system.row_owner[i] == id) {
        rows.push_back(static_cast<Eigen::Index>(i));
        rows.push_back(static_cast<Eigen::Index>(i + 1));
        found = true;
        break;
      }
    }
    if (!found) {
      throw Error(ErrorCode::InvalidArgument,
                  "line " + std::to_string(id) + " is not in the system");
    }
  }
  return rows;
}

FdeReport fde(std::span<const Correspondence> correspondences,
              const Pose& initial, const CameraIntrinsics& k, double sigma_px,
              const IntegrityConfig& cfg, const SolveOptions& opts) {
  cfg.validate();
  if (correspondences.size() < static_cast<std::size_t>(cfg.min_lines)) {
    throw Error(ErrorCode::InsufficientObservations,
                std::to_string(correspondences.size()) +
                    " correspondences, integrity monitoring needs " +
                    std::to_string(cfg.min_lines));
  }
  FdeReport report;
  std::vector<Correspondence> current(correspondences.begin(),
                                      correspondences.end());
  Pose pose = initial;
  while (true) {
    SolveReport solve = gauss_newton_solve(current, pose, k, sigma_px, opts);
    const LinearizedSystem& sys = solve.final_system;
    if (!sys.dropped_ids.empty()) {
      std::erase_if(current, [&](const Correspondence& c) {
        return std::find(sys.dropped_ids.begin(), sys.dropped_ids.end(),
                         c.map_line_id) != sys.dropped_ids.end();
      });
    }
    FdeRound round;
    round.rows = static_cast<int>(sys.rows());
    round.dof = round.rows - 6;
    round.threshold = chi2_quantile(1.0 - cfg.alpha, round.dof);
    round.wsse = wsse(sys);
    report.wsse_history.push_back(round);
    report.surviving_system = sys;
    report.surviving_pose = solve.pose;
    report.surviving = current;
    report.solver_iterations = solve.iterations;
    report.solver_converged = solve.converged;

    if (round.wsse <= round.threshold) {
      report.passed = true;
      return report;
    }
    // More faults than the protection level assumes, or too few lines left.
    if (static_cast<int>(report.excluded_line_ids.size()) >= cfg.r_max ||
        current.size() <= static_cast<std::size_t>(cfg.min_lines)) {
      report.passed = false;
      return report;
    }
    // Exclude whole lines: both endpoint rows count together.
    const Eigen::VectorXd wr = sys.weights.cwiseProduct(sys.residuals);
    Eigen::MatrixXd S;
    if (cfg.exclusion == ExclusionRule::LargestReduction) S = s_matrix(sys);
    Eigen::Index worst = 0;
    double worst_value = -1.0;
    for (Eigen::Index i = 0; i + 1 < sys.rows(); i += 2) {
      double v = wr(i) * sys.residuals(i) + wr(i + 1) * sys.residuals(i + 1);
      if (cfg.exclusion == ExclusionRule::LargestReduction) {
        const Eigen::Matrix2d block = S.block<2, 2>(i, i);
        const Eigen::Vector2d g = wr.segment<2>(i);
        const Eigen::LDLT<Eigen::Matrix2d> ldlt(block);
        // an unobservable pair cannot lower the WSSE
        v = ldlt.info() == Eigen::Success && block.trace() > 0.0
                ? g.dot(ldlt.solve(g))
                : 0.0;
      }
      if (v > worst_value) {
        worst_value = v;
        worst = i;
      }
    }
    const int worst_id = sys.row_owner[static_cast<std::size_t>(worst)];
    report.excluded_line_ids.push_back(worst_id);
    std::erase_if(current, [&](const Correspondence& c) {
      return c.map_line_id == worst_id;
    });
    pose = solve.pose;
  }
}

BiasTermResult bias_term(const LinearizedSystem& system, Axis axis, int r,
                         double gamma) {
  const auto ids = line_ids(system);
  const int lines = static_cast<int>(ids.size());
  if (r < 1 || r > lines) {
    throw Error(ErrorCode::InvalidArgument,
                "hypothesis size " + std::to_string(r) + " not in [1, " +
                    std::to_string(lines) + "]");
  }
  if (gamma < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "gamma must be non-negative");
  }
  const Eigen::MatrixXd S = s_matrix(system);
  const Eigen::MatrixXd D = d_matrix(system, axis);

  BiasTermResult result;
  std::vector<int> pick(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) pick[i] = i;
  std::vector<int> subset(static_cast<std::size_t>(r));
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(2 * r));
  while (true) {
    for (int i = 0; i < r; ++i) {
      subset[i] = ids[pick[i]];
      rows[2 * i] = 2 * pick[i];
      rows[2 * i + 1] = 2 * pick[i] + 1;
    }
    const Eigen::MatrixXd Sa = S(rows, rows);
    const Eigen::MatrixXd Da = D(rows, rows);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> s_eig(Sa, Eigen::EigenvaluesOnly);
    const double lo = s_eig.eigenvalues()(0);
    const double hi = s_eig.eigenvalues()(s_eig.eigenvalues().size() - 1);
    if (!(lo > 0.0) || hi / lo > kSubsetConditionLimit) {
      ++result.skipped;
    } else {
      Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(
          Da, Sa, Eigen::EigenvaluesOnly);
      const double lambda = std::max(0.0, ges.eigenvalues().maxCoeff());
      ++result.evaluated;
      if (result.worst_subset.empty() || lambda > result.max_eigenvalue) {
        result.max_eigenvalue = lambda;
        result.worst_subset = subset;
      }
    }
    // next combination in lexicographic order
    int i = r - 1;
    while (i >= 0 && pick[i] == lines - r + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < r; ++j) pick[j] = pick[j - 1] + 1;
  }
  result.bound = std::sqrt(result.max_eigenvalue * gamma);
  return result;
}

double noise_term(const LinearizedSystem& system, Axis axis, double k_sigma) {
  const auto cov = state_covariance(system);
  const int i = static_cast<int>(axis);
  return k_sigma * std::sqrt(std::max(0.0, cov(i, i)));
}

PlReport protection_level(const LinearizedSystem& system,
                          const IntegrityConfig& cfg) {
  cfg.validate();
  const int dof = static_cast<int>(system.rows()) - 6;
  PlReport report;
  report.gamma = chi2_quantile(1.0 - cfg.alpha, dof);
  report.icn = icn(system);
  const int lines = static_cast<int>(system.line_count());
  for (Axis axis : kAllAxes) {
    const int a = static_cast<int>(axis);
    for (int r = 1; r <= std::min(cfg.r_max, lines); ++r) {
      const BiasTermResult b = bias_term(system, axis, r, report.gamma);
      report.skipped_subsets += b.skipped;
      if (report.worst_subset[a].empty() || b.bound > report.bias[a]) {
        report.bias[a] = b.bound;
        report.worst_subset[a] = b.worst_subset;
      }
    }
    report.noise[a] = noise_term(system, axis, cfg.k_sigma);
    report.pl[a] = report.bias[a] + report.noise[a];
  }
  return report;
}

PlReport protection_level(const FdeReport& fde_report,
                          const IntegrityConfig& cfg) {
  if (!fde_report.passed) {
    throw Error(ErrorCode::IntegrityUnavailable,
                "fault detection did not pass; protection level unavailable");
  }
  return protection_level(fde_report.surviving_system, cfg);
}

double icn(const LinearizedSystem& system) {
  const Eigen::Matrix<double, 6, 6> JtJ =
      system.jacobian.transpose() * system.jacobian;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(
      JtJ, Eigen::EigenvaluesOnly);
  const double hi = eig.eigenvalues()(5);
  if (!(hi > 0.0)) return 0.0;
  return std::max(0.0, eig.eigenvalues()(0)) / hi;
}

double bound_rate(std::span<const double> bounds, std::span<const double> errors) {
  if (bounds.empty() || bounds.size() != errors.size()) {
    throw Error(ErrorCode::DomainError,
                "bound_rate needs non-empty series of equal length");
  }
  std::size_t bounded = 0;
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    if (bounds[i] >= std::abs(errors[i])) ++bounded;
  }
  return static_cast<double>(bounded) / static_cast<double>(bounds.size());
}

NoncentralityGap noncentrality_gap(const LinearizedSystem& system,
                                   const Eigen::VectorXd& bias, int trials,
                                   std::uint64_t seed) {
  if (bias.size() != system.rows() || trials < 1) {
    throw Error(ErrorCode::InvalidArgument,
                "bias length must match system rows and trials >= 1");
  }
  const Eigen::MatrixXd S = s_matrix(system);
  NoncentralityGap gap;
  gap.predicted = bias.dot(S * bias);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::VectorXd sigma = system.weights.cwiseInverse().cwiseSqrt();
  Eigen::VectorXd z(system.rows());
  double sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      z(i) = bias(i) + sigma(i) * normal(rng);
    }
    sum += z.dot(S * z);
  }
  gap.empirical = sum / trials - static_cast<double>(system.rows() - 6);
  return gap;
}

}  // namespace linteg
