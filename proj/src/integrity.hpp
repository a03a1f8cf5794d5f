#pragma once

#include "estimator.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace linteg {

// State axes in [rho; phi] order.
enum class Axis { X = 0, Y, Z, Roll, Pitch, Yaw };
inline constexpr std::array<Axis, 6> kAllAxes = {Axis::X,    Axis::Y,     Axis::Z,
                                                 Axis::Roll, Axis::Pitch, Axis::Yaw};
const char* axis_name(Axis axis);

enum class ExclusionRule {
  // line with the largest summed weighted squared residual of its two rows
  LargestResidual,
  // line whose removal lowers the WSSE the most (normalized residual)
  LargestReduction,
};

struct IntegrityConfig {
  double alpha = 0.05;
  double k_sigma = 3.0;
  int r_max = 2;
  int min_lines = 4;
  ExclusionRule exclusion = ExclusionRule::LargestReduction;

  void validate() const;
};

struct FdeRound {
  double wsse = 0.0;
  double threshold = 0.0;
  int rows = 0;
  int dof = 0;
};

struct FdeReport {
  std::vector<int> excluded_line_ids;
  std::vector<FdeRound> wsse_history;
  bool passed = false;
  LinearizedSystem surviving_system;
  Pose surviving_pose;
  std::vector<Correspondence> surviving;
  int solver_iterations = 0;
  bool solver_converged = false;
};

struct PlReport {
  std::array<double, 6> bias{};
  std::array<double, 6> noise{};
  std::array<double, 6> pl{};
  std::array<std::vector<int>, 6> worst_subset;
  double icn = 0.0;
  double gamma = 0.0;
  // Hypotheses skipped because A^T S A was ill-conditioned (summed over
  // axes and hypothesis sizes).
  int skipped_subsets = 0;
};

struct BiasTermResult {
  double bound = 0.0;
  std::vector<int> worst_subset;
  double max_eigenvalue = 0.0;
  int skipped = 0;
  int evaluated = 0;
};

// A^T S A condition above which a fault hypothesis is skipped.
inline constexpr double kSubsetConditionLimit = 1e12;

double wsse(const LinearizedSystem& system);

// Inverse CDF of the central chi-squared distribution. Throws DomainError.
double chi2_quantile(double p, int dof);

Eigen::MatrixXd s_matrix(const LinearizedSystem& system);
Eigen::MatrixXd d_matrix(const LinearizedSystem& system, Axis axis);
// P = J (J^T W J)^-1 J^T W
Eigen::MatrixXd projection_matrix(const LinearizedSystem& system);
Eigen::Matrix<double, 6, 6> state_covariance(const LinearizedSystem& system);

// Row indices belonging to the given line ids, paired (2k, 2k+1).
std::vector<Eigen::Index> rows_of_lines(const LinearizedSystem& system,
                                        std::span<const int> line_ids);
// Distinct line ids in row order.
std::vector<int> line_ids(const LinearizedSystem& system);

// Solve, test, exclude the worst line, repeat. Fails once r_max lines are
// out and the test still rejects, or when no line can be spared.
FdeReport fde(std::span<const Correspondence> correspondences,
              const Pose& initial, const CameraIntrinsics& k, double sigma_px,
              const IntegrityConfig& cfg, const SolveOptions& opts = {});

// Worst undetected-bias effect on one axis over all hypotheses of exactly r
// faulty lines.
BiasTermResult bias_term(const LinearizedSystem& system, Axis axis, int r,
                         double gamma);

double noise_term(const LinearizedSystem& system, Axis axis, double k_sigma);

// Protection levels on the system, with gamma taken from the chi-squared
// threshold at the system's degrees of freedom.
PlReport protection_level(const LinearizedSystem& system,
                          const IntegrityConfig& cfg);
// Throws IntegrityUnavailable when the FDE did not pass.
PlReport protection_level(const FdeReport& fde_report,
                          const IntegrityConfig& cfg);

// lambda_min / lambda_max of J^T J.
double icn(const LinearizedSystem& system);

// Fraction of entries with bound >= |error|. Throws DomainError on empty or
// mismatched input.
double bound_rate(std::span<const double> bounds, std::span<const double> errors);

struct NoncentralityGap {
  double empirical = 0.0;
  double predicted = 0.0;
};

// Monte Carlo check of E[WSSE] - (n - 6) = b^T S b on the linear model of
// the system, with noise drawn from its weights.
NoncentralityGap noncentrality_gap(const LinearizedSystem& system,
                                   const Eigen::VectorXd& bias, int trials,
                                   std::uint64_t seed);

}  // namespace linteg
