#include "doctest.h"

#include "error.hpp"
#include "estimator.hpp"
#include "integrity.hpp"
#include "simulator.hpp"
#include "test_support.hpp"

#include <Eigen/Eigenvalues>

#include <numbers>

using namespace linteg;
using linteg::testing::Scenario;
using linteg::testing::make_scenario;

namespace {

LinearizedSystem synthetic_system(int lines, std::uint64_t seed, double weight = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  LinearizedSystem s;
  const int rows = 2 * lines;
  s.jacobian.resize(rows, 6);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < 6; ++j) s.jacobian(i, j) = n(rng);
  s.residuals = Eigen::VectorXd::Zero(rows);
  s.weights = Eigen::VectorXd::Constant(rows, weight);
  for (int i = 0; i < rows; ++i) s.row_owner.push_back(100 + i / 2);
  return s;
}

LinearizedSystem frame_system(std::uint64_t seed, double sigma, int clean_lines = 0) {
  NoiseModel noise;
  noise.sigma_px = 0.0;
  noise.guess_sigma_t = noise.guess_sigma_r = 0.0;
  Scenario sc;
  while (!make_scenario(seed, noise, clean_lines, sc)) ++seed;
  return assemble_system(sc.corrs, sc.frame.true_pose, default_camera(), sigma);
}

// Regularized CDF of chi-square with even dof: 1 - e^{-x/2} sum_{j<k/2} (x/2)^j / j!
double chi2_cdf_even(double x, int dof) {
  double term = 1.0;
  double sum = 0.0;
  for (int j = 0; j < dof / 2; ++j) {
    if (j > 0) term *= (x / 2) / j;
    sum += term;
  }
  return 1.0 - std::exp(-x / 2) * sum;
}

}  // namespace

TEST_CASE("wsse") {
  LinearizedSystem s = synthetic_system(5, 1);
  CHECK(wsse(s) == 0.0);
  s.residuals = Eigen::VectorXd::LinSpaced(10, -2, 3);
  CHECK(wsse(s) == doctest::Approx(s.residuals.squaredNorm()));
  s.weights.setConstant(0.25);
  CHECK(wsse(s) == doctest::Approx(0.25 * s.residuals.squaredNorm()));
}

TEST_CASE("chi2_quantile") {
  CHECK(std::abs(chi2_quantile(0.95, 1) - 3.8415) < 1e-3);
  CHECK(std::abs(chi2_quantile(0.95, 8) - 15.5073) < 1e-3);
  CHECK(std::abs(chi2_quantile(0.95, 10) - 18.3070) < 1e-3);
  CHECK(std::abs(chi2_quantile(0.5, 2) - 2 * std::log(2.0)) < 1e-6);
  for (int dof : {2, 4, 6, 10, 20, 40}) {
    for (double p : {0.01, 0.3, 0.5, 0.9, 0.95, 0.999}) {
      CHECK(std::abs(chi2_cdf_even(chi2_quantile(p, dof), dof) - p) < 1e-9);
    }
  }
  for (double bad_p : {0.0, 1.0, -0.1, 1.5}) {
    CHECK_THROWS_AS(chi2_quantile(bad_p, 3), Error);
  }
  CHECK_THROWS_AS(chi2_quantile(0.5, 0), Error);
}

TEST_CASE("S and P matrices") {
  const LinearizedSystem s = frame_system(7, 2.0);
  const Eigen::Index n = s.rows();
  const Eigen::MatrixXd S = s_matrix(s);
  const Eigen::MatrixXd P = projection_matrix(s);
  const Eigen::MatrixXd W = s.weights.asDiagonal();
  CHECK((S * s.jacobian).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((P * P - P).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((S - W * (Eigen::MatrixXd::Identity(n, n) - P)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((S - S.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double tol = 1e-9 * ev.maxCoeff();
  CHECK(ev.minCoeff() > -tol);
  CHECK((ev.array() > tol).count() == n - 6);
}

TEST_CASE("D matrices are rank one and reproduce error propagation") {
  const LinearizedSystem s = frame_system(9, 2.0);
  const Eigen::MatrixXd W = s.weights.asDiagonal();
  const Eigen::MatrixXd JtW = s.jacobian.transpose() * W;
  const Eigen::Matrix<double, 6, 6> cov = (JtW * s.jacobian).inverse();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (Axis axis : kAllAxes) {
    const Eigen::MatrixXd D = d_matrix(s, axis);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
    const Eigen::VectorXd ev = es.eigenvalues();
    CHECK(ev(ev.size() - 2) < 1e-10 * ev(ev.size() - 1));
    CHECK(ev.minCoeff() > -1e-10 * ev.maxCoeff());
    for (int t = 0; t < 5; ++t) {
      Eigen::VectorXd b(s.rows());
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = n(rng);
      const double state = (cov * JtW * b)(static_cast<int>(axis));
      CHECK(b.dot(D * b) == doctest::Approx(state * state).epsilon(1e-9));
    }
  }
}

TEST_CASE("noise term") {
  // orthonormal columns give J^T J = I
  LinearizedSystem s = synthetic_system(6, 5);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(s.jacobian);
  s.jacobian = qr.householderQ() * Eigen::MatrixXd::Identity(12, 6);
  for (Axis axis : kAllAxes) CHECK(noise_term(s, axis, 3.0) == doctest::Approx(3.0));
  const LinearizedSystem f = frame_system(11, 2.0);
  LinearizedSystem f4 = f;
  f4.weights *= 4.0;
  for (Axis axis : kAllAxes) {
    CHECK(noise_term(f4, axis, 3.0) == doctest::Approx(0.5 * noise_term(f, axis, 3.0)));
  }
}

TEST_CASE("3 sigma noise term bounds zero-bias errors at least 99% of the time") {
  const LinearizedSystem s = frame_system(13, 2.0);
  const Eigen::MatrixXd JtW = s.jacobian.transpose() * s.weights.asDiagonal();
  const Eigen::Matrix<double, 6, 6> cov = state_covariance(s);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 2.0);
  std::array<int, 6> inside{};
  const int trials = 4000;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd z(s.rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = n(rng);
    const Vec6 err = cov * JtW * z;
    for (Axis axis : kAllAxes) {
      const int a = static_cast<int>(axis);
      if (std::abs(err(a)) <= noise_term(s, axis, 3.0)) ++inside[a];
    }
  }
  for (int a = 0; a < 6; ++a) CHECK(inside[a] >= 0.99 * trials);
}

TEST_CASE("bias term") {
  const LinearizedSystem s = frame_system(19, 2.0, 10);
  for (Axis axis : kAllAxes) {
    CHECK(bias_term(s, axis, 1, 0.0).bound == 0.0);
    const auto r1 = bias_term(s, axis, 1, 5.0);
    CHECK(r1.evaluated + r1.skipped == 10);
    CHECK(r1.worst_subset.size() == 1);
    const auto r2 = bias_term(s, axis, 2, 5.0);
    CHECK(r2.evaluated + r2.skipped == 45);
    CHECK(r2.bound >= r1.bound);
    // scaling law in gamma
    CHECK(bias_term(s, axis, 1, 20.0).bound == doctest::Approx(2.0 * r1.bound));
  }
}

TEST_CASE("bias term equals brute-force maximization on a single line") {
  const LinearizedSystem s = frame_system(23, 2.0, 8);
  const Eigen::MatrixXd S = s_matrix(s);
  const Eigen::MatrixXd JtW = s.jacobian.transpose() * s.weights.asDiagonal();
  const Eigen::Matrix<double, 6, 6> cov = state_covariance(s);
  const double gamma = 9.0;
  for (Axis axis : kAllAxes) {
    const int a = static_cast<int>(axis);
    const auto res = bias_term(s, axis, 1, gamma);
    // scan every line and every direction of its 2-d bias on the constraint
    double best = 0.0;
    const auto ids = line_ids(s);
    for (int id : ids) {
      const std::vector<int> one{id};
      const auto rows = rows_of_lines(s, one);
      Eigen::Matrix2d M;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) M(i, j) = S(rows[i], rows[j]);
      for (int k = 0; k < 20000; ++k) {
        const double t = std::numbers::pi * k / 20000.0;
        Eigen::Vector2d u(std::cos(t), std::sin(t));
        u *= std::sqrt(gamma / u.dot(M * u));
        Eigen::VectorXd b = Eigen::VectorXd::Zero(s.rows());
        b(rows[0]) = u(0);
        b(rows[1]) = u(1);
        best = std::max(best, std::abs((cov * JtW * b)(a)));
      }
    }
    CHECK(best <= res.bound + 1e-6);
    CHECK(best == doctest::Approx(res.bound).epsilon(1e-6));
  }
}

TEST_CASE("protection level") {
  const LinearizedSystem s = frame_system(29, 2.0, 12);
  IntegrityConfig cfg;
  const PlReport pl = protection_level(s, cfg);
  CHECK(pl.gamma == doctest::Approx(chi2_quantile(0.95, static_cast<int>(s.rows()) - 6)));
  for (int a = 0; a < 6; ++a) {
    CHECK(pl.pl[a] == pl.bias[a] + pl.noise[a]);
    CHECK(pl.pl[a] > 0.0);
    CHECK(pl.bias[a] >= 0.0);
    CHECK(pl.noise[a] >= 0.0);
  }
  CHECK(pl.icn > 0.0);
  CHECK(pl.icn <= 1.0);

  // doubling sigma strictly increases every PL
  LinearizedSystem wide = s;
  wide.weights *= 0.25;
  const PlReport pl_wide = protection_level(wide, cfg);
  for (int a = 0; a < 6; ++a) CHECK(pl_wide.pl[a] > pl.pl[a]);

  // more simultaneous faults never decrease the PL
  IntegrityConfig r1 = cfg;
  r1.r_max = 1;
  IntegrityConfig r3 = cfg;
  r3.r_max = 3;
  const PlReport p1 = protection_level(s, r1);
  const PlReport p3 = protection_level(s, r3);
  for (int a = 0; a < 6; ++a) {
    CHECK(pl.pl[a] >= p1.pl[a]);
    CHECK(p3.pl[a] >= pl.pl[a]);
  }

  // larger alpha means smaller gamma and smaller bias terms
  IntegrityConfig loose = cfg;
  loose.alpha = 0.2;
  const PlReport pl_loose = protection_level(s, loose);
  for (int a = 0; a < 6; ++a) CHECK(pl_loose.pl[a] < pl.pl[a]);
}

TEST_CASE("icn") {
  LinearizedSystem s = synthetic_system(6, 31);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(s.jacobian);
  s.jacobian = qr.householderQ() * Eigen::MatrixXd::Identity(12, 6);
  CHECK(icn(s) == doctest::Approx(1.0));
  s.jacobian.col(5) = s.jacobian.col(0);
  CHECK(icn(s) < 1e-12);
}

TEST_CASE("bound_rate") {
  std::vector<double> pl(100, 1.0);
  std::vector<double> err(100, 0.5);
  CHECK(bound_rate(pl, err) == 1.0);
  for (int i = 0; i < 5; ++i) err[i] = -2.0;
  CHECK(bound_rate(pl, err) == doctest::Approx(0.95));
  CHECK_THROWS_AS(bound_rate(std::vector<double>{}, std::vector<double>{}), Error);
  CHECK_THROWS_AS(bound_rate(pl, std::vector<double>(3, 0.0)), Error);
}

TEST_CASE("noncentrality") {
  const LinearizedSystem s = frame_system(37, 1.0, 10);
  const auto zero = noncentrality_gap(s, Eigen::VectorXd::Zero(s.rows()), 4000, 5);
  CHECK(zero.predicted == 0.0);
  // WSSE ~ chi2(n-6): sd of the mean is sqrt(2 (n-6) / trials)
  CHECK(std::abs(zero.empirical) < 5 * std::sqrt(2.0 * (s.rows() - 6) / 4000.0));

  Eigen::VectorXd b = Eigen::VectorXd::Zero(s.rows());
  b(3) = 7.0;
  const Eigen::MatrixXd S = s_matrix(s);
  const auto one = noncentrality_gap(s, b, 10, 5);
  CHECK(one.predicted == doctest::Approx(S(3, 3) * 49.0));
}

TEST_CASE("fde") {
  const auto k = default_camera();
  IntegrityConfig cfg;
  NoiseModel noise;
  noise.sigma_px = 0.0;
  noise.guess_sigma_t = noise.guess_sigma_r = 0.0;

  SUBCASE("zero noise passes without exclusions") {
    Scenario sc;
    REQUIRE(make_scenario(41, noise, 12, sc));
    const FdeReport r = fde(sc.corrs, sc.frame.true_pose, k, 2.0, cfg);
    CHECK(r.passed);
    CHECK(r.excluded_line_ids.empty());
    REQUIRE(r.wsse_history.size() == 1);
    CHECK(r.wsse_history[0].dof == 2 * 12 - 6);
  }

  SUBCASE("a 30 px biased line is excluded") {
    noise.sigma_px = 2.0;
    noise.outlier_count = 1;
    int correct = 0;
    int trials = 0;
    for (std::uint64_t seed = 100; trials < 60; ++seed) {
      Scenario sc;
      if (!make_scenario(seed, noise, 12, sc)) continue;
      ++trials;
      const FdeReport r = fde(sc.corrs, sc.frame.true_pose, k, 2.0, cfg);
      if (r.passed && !r.excluded_line_ids.empty() &&
          r.excluded_line_ids.front() == sc.faulty.front()) {
        ++correct;
      }
      // an exclusion removes exactly one endpoint pair
      for (std::size_t i = 1; i < r.wsse_history.size(); ++i) {
        CHECK(r.wsse_history[i - 1].rows - r.wsse_history[i].rows == 2);
      }
      CHECK(r.surviving_system.rows() == 2 * static_cast<Eigen::Index>(r.surviving.size()));
    }
    CHECK(correct >= 55);
  }

  SUBCASE("every line biased makes the frame unavailable") {
    noise.sigma_px = 1.0;
    noise.outlier_count = 1000;
    noise.outlier_bias_px = 50.0;
    Scenario sc;
    REQUIRE(make_scenario(43, noise, 0, sc));
    sc.corrs.resize(std::min<std::size_t>(sc.corrs.size(), 14));
    const FdeReport r = fde(sc.corrs, sc.frame.true_pose, k, 1.0, cfg);
    CHECK_FALSE(r.passed);
    CHECK(static_cast<int>(r.excluded_line_ids.size()) == cfg.r_max);
    for (const auto& round : r.wsse_history) CHECK(round.dof > 0);
    CHECK_THROWS_AS(protection_level(r, cfg), Error);
  }

  SUBCASE("the residual rule is still available") {
    noise.sigma_px = 2.0;
    noise.outlier_count = 1;
    IntegrityConfig plain = cfg;
    plain.exclusion = ExclusionRule::LargestResidual;
    Scenario sc;
    REQUIRE(make_scenario(53, noise, 12, sc));
    const FdeReport r = fde(sc.corrs, sc.frame.true_pose, k, 2.0, plain);
    CHECK(r.passed);
    CHECK(r.excluded_line_ids.front() == sc.faulty.front());
  }

  SUBCASE("too few correspondences") {
    Scenario sc;
    REQUIRE(make_scenario(47, noise, 3, sc));
    CHECK_THROWS_AS(fde(sc.corrs, sc.frame.true_pose, k, 2.0, cfg), Error);
  }
}

TEST_CASE("config validation") {
  IntegrityConfig c;
  CHECK_NOTHROW(c.validate());
  c.alpha = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.r_max = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.min_lines = 3;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.k_sigma = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
}
