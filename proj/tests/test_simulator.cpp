#include "doctest.h"

#include "error.hpp"
#include "estimator.hpp"
#include "simulator.hpp"
#include "test_support.hpp"

#include <numbers>
#include <set>

using namespace linteg;

namespace {

bool axis_parallel(const LineSegment3D& s) {
  const Vec3 d = (s.p_end - s.p_start).normalized();
  return d.cwiseAbs().maxCoeff() > 1.0 - 1e-12;
}

}  // namespace

TEST_CASE("scene config validation") {
  SceneConfig c;
  CHECK_NOTHROW(c.validate());
  c.line_count = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_THROWS_AS(generate_map(c), Error);
  c = {};
  c.axis_aligned_fraction = 0.5;
  c.random_fraction = 0.4;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.min_length = 4.0;
  c.max_length = 2.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("generate_map") {
  SceneConfig c;
  c.seed = 77;
  const auto a = generate_map(c);
  const auto b = generate_map(c);
  REQUIRE(a.size() == static_cast<std::size_t>(c.line_count));
  std::set<int> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].p_start == b[i].p_start);
    CHECK(a[i].p_end == b[i].p_end);
    CHECK(ids.insert(a[i].id).second);
    CHECK(a[i].length() >= c.min_length - 1e-12);
    CHECK(a[i].length() <= c.max_length + 1e-12);
    if (axis_parallel(a[i])) {
      // wall lines stay on the box
      CHECK(a[i].p_start.cwiseAbs().maxCoeff() <= c.extent + 1e-9);
      CHECK(a[i].p_end.cwiseAbs().maxCoeff() <= c.extent + 1e-9);
    }
  }
  c.seed = 78;
  CHECK(generate_map(c)[0].p_start != a[0].p_start);

  SceneConfig aligned;
  aligned.axis_aligned_fraction = 1.0;
  aligned.random_fraction = 0.0;
  for (const auto& s : generate_map(aligned)) CHECK(axis_parallel(s));

  SceneConfig mixed;
  mixed.line_count = 100;
  int n_aligned = 0;
  for (const auto& s : generate_map(mixed)) n_aligned += axis_parallel(s) ? 1 : 0;
  CHECK(n_aligned == 70);

  SceneConfig parallel;
  parallel.layout = SceneLayout::Parallel;
  for (const auto& s : generate_map(parallel)) {
    const Vec3 d = (s.p_end - s.p_start).normalized();
    CHECK(std::abs(std::abs(d.z()) - 1.0) < 1e-12);
  }
}

TEST_CASE("circle trajectory") {
  TrajectoryConfig t;
  t.center = {0.5, -0.2, 0.3};
  t.radius = 1.7;
  t.steps = 64;
  const auto traj = generate_trajectory(t);
  REQUIRE(traj.size() == 64);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Vec3 c = traj[i].pose_wc.inverse().translation;
    CHECK(std::abs((c - t.center).norm() - t.radius) < 1e-9);
    CHECK(traj[i].timestamp == doctest::Approx(i / t.rate_hz));
    if (i > 0) {
      const Mat3 dr = traj[i].pose_wc.rotation_matrix() *
                      traj[i - 1].pose_wc.rotation_matrix().transpose();
      CHECK(so3_log(dr).norm() < t.max_angular_step);
    }
  }
  t.steps = 10;  // 36 degrees per step exceeds the 0.2 rad default
  CHECK_THROWS_AS(generate_trajectory(t), Error);
}

TEST_CASE("waypoint trajectory") {
  TrajectoryConfig t;
  t.kind = TrajectoryKind::Waypoints;
  t.look_at = {0, 0, 0};
  t.waypoints = {{2, 0, 0}};
  t.steps = 5;
  const auto still = generate_trajectory(t);
  REQUIRE(still.size() == 5);
  for (const auto& p : still) {
    CHECK((p.pose_wc.matrix() - still[0].pose_wc.matrix()).norm() == 0.0);
  }
  t.waypoints = {{2, 0, 0}, {0, 2, 0}, {-2, 0, 0}};
  t.steps = 40;
  const auto path = generate_trajectory(t);
  CHECK((path.front().pose_wc.inverse().translation - Vec3(2, 0, 0)).norm() < 1e-12);
  CHECK((path.back().pose_wc.inverse().translation - Vec3(-2, 0, 0)).norm() < 1e-12);
  for (std::size_t i = 1; i < path.size(); ++i) {
    const Mat3 dr = path[i].pose_wc.rotation_matrix() *
                    path[i - 1].pose_wc.rotation_matrix().transpose();
    CHECK(so3_log(dr).norm() < t.max_angular_step);
  }
}

TEST_CASE("look_at_pose points the optical axis at the target") {
  const Pose p = look_at_pose({3, 1, 0.5}, {0, 0, 0});
  const Vec3 target_cam = p.transform({0, 0, 0});
  CHECK(std::abs(target_cam.x()) < 1e-12);
  CHECK(std::abs(target_cam.y()) < 1e-12);
  CHECK(target_cam.z() > 0.0);
  // world up maps to image up (negative y)
  const Vec3 up_cam = p.rotation_matrix() * Vec3::UnitZ();
  CHECK(up_cam.y() < 0.0);
}

TEST_CASE("noise-free render gives exact projections") {
  const auto k = default_camera();
  SceneConfig sc;
  sc.line_count = 150;
  const auto map = generate_map(sc);
  const Pose pose = look_at_pose({2, -1, 0.2}, {0, 0, 0});
  const SimFrame f = testing::clean_frame(map, pose, k);
  REQUIRE(!f.detections.empty());
  CHECK((f.initial_guess.matrix() - pose.matrix()).norm() == 0.0);
  for (std::size_t i = 0; i < f.detections.size(); ++i) {
    const auto& s = f.source_segments[i];
    CHECK(s.id == f.ground_truth_matches[i]);
    // source segment survives the cull at the true pose
    REQUIRE(clip_to_view(s, pose, k));
    for (const Vec3& p : {s.p_start, s.p_end}) {
      CHECK(std::abs(signed_distance(f.detections[i], project(pose, k, p))) < 1e-9);
    }
  }
  const auto corrs = ground_truth_correspondences(f);
  const SolveReport rep = gauss_newton_solve(corrs, f.initial_guess, k, 1.0);
  CHECK((rep.pose.matrix() - pose.matrix()).norm() < 1e-9);
}

TEST_CASE("endpoint residual spread matches sigma") {
  const auto k = default_camera();
  SceneConfig sc;
  sc.line_count = 150;
  const auto map = generate_map(sc);
  NoiseModel noise;
  noise.sigma_px = 2.0;
  double sum2 = 0.0;
  std::size_t n = 0;
  for (std::uint64_t seed = 0; n < 1000; ++seed) {
    const double th = 0.7 * static_cast<double>(seed);
    const Pose pose = look_at_pose({2 * std::cos(th), 2 * std::sin(th), 0.1}, {0, 0, 0});
    const SimFrame f = render_frame(map, pose, k, noise, seed);
    for (const auto& c : ground_truth_correspondences(f)) {
      for (Endpoint e : {Endpoint::Start, Endpoint::End}) {
        const double r = endpoint_residual(c, e, pose, k);
        sum2 += r * r;
        ++n;
      }
    }
  }
  const double sd = std::sqrt(sum2 / static_cast<double>(n));
  MESSAGE("endpoint residual sd " << sd << " over " << n);
  CHECK(sd > 1.8);
  CHECK(sd < 2.2);
}

TEST_CASE("offset outliers are recorded exactly") {
  const auto k = default_camera();
  SceneConfig sc;
  sc.line_count = 150;
  const auto map = generate_map(sc);
  const Pose pose = look_at_pose({-2, 0.5, 0}, {0, 0, 0});
  NoiseModel noise;
  noise.sigma_px = 0.0;
  noise.outlier_count = 1;
  noise.outlier_bias_px = 30.0;
  const SimFrame f = render_frame(map, pose, k, noise, 9);
  REQUIRE(f.injected_outlier_ids.size() == 1);
  int biased = 0;
  for (const auto& c : ground_truth_correspondences(f)) {
    const double r0 = endpoint_residual(c, Endpoint::Start, pose, k);
    const double r1 = endpoint_residual(c, Endpoint::End, pose, k);
    const bool flagged = c.map_line_id == f.injected_outlier_ids[0];
    if (flagged) {
      CHECK(std::abs(r0) == doctest::Approx(30.0));
      CHECK(r1 == doctest::Approx(r0));
      ++biased;
    } else {
      CHECK(std::abs(r0) < 1e-9);
      CHECK(std::abs(r1) < 1e-9);
    }
  }
  CHECK(biased == 1);

  noise.outlier_count = 3;
  const SimFrame g = render_frame(map, pose, k, noise, 10);
  CHECK(g.injected_outlier_ids.size() == 3);
  std::set<int> labels(g.ground_truth_matches.begin(), g.ground_truth_matches.end());
  for (int id : g.injected_outlier_ids) CHECK(labels.count(id) == 1);
}

TEST_CASE("mismatch outliers relabel to another visible line") {
  const auto k = default_camera();
  SceneConfig sc;
  sc.line_count = 150;
  const auto map = generate_map(sc);
  const Pose pose = look_at_pose({0, 2, 0.1}, {0, 0, 0});
  NoiseModel noise;
  noise.sigma_px = 0.0;
  const SimFrame clean = render_frame(map, pose, k, noise, 11);
  noise.outlier_count = 2;
  noise.outlier_mode = OutlierMode::Mismatch;
  const SimFrame f = render_frame(map, pose, k, noise, 11);
  REQUIRE(f.injected_outlier_ids.size() == 2);
  CHECK(f.detections.size() == clean.detections.size() - 2);
  std::set<int> labels(f.ground_truth_matches.begin(), f.ground_truth_matches.end());
  CHECK(labels.size() == f.ground_truth_matches.size());
  for (std::size_t i = 0; i < f.detections.size(); ++i) {
    const bool flagged = std::find(f.injected_outlier_ids.begin(), f.injected_outlier_ids.end(),
                                   f.ground_truth_matches[i]) != f.injected_outlier_ids.end();
    const auto& s = f.source_segments[i];
    const double r = std::abs(signed_distance(f.detections[i], project(pose, k, s.p_start))) +
                     std::abs(signed_distance(f.detections[i], project(pose, k, s.p_end)));
    if (flagged) {
      CHECK(r > 1e-6);
    } else {
      CHECK(r < 1e-9);
    }
  }
}

TEST_CASE("render is deterministic and fails without visible lines") {
  const auto k = default_camera();
  const auto map = generate_map({});
  NoiseModel noise;
  noise.sigma_px = 1.5;
  noise.outlier_count = 2;
  const Pose pose = look_at_pose({2, 0, 0}, {0, 0, 0});
  const SimFrame a = render_frame(map, pose, k, noise, 5);
  const SimFrame b = render_frame(map, pose, k, noise, 5);
  REQUIRE(a.detections.size() == b.detections.size());
  for (std::size_t i = 0; i < a.detections.size(); ++i) {
    CHECK(a.detections[i].p_start == b.detections[i].p_start);
    CHECK(a.detections[i].p_end == b.detections[i].p_end);
  }
  CHECK(a.injected_outlier_ids == b.injected_outlier_ids);
  CHECK(a.initial_guess.matrix() == b.initial_guess.matrix());

  // looking out of the room from far away
  const Pose away = look_at_pose({50, 0, 0}, {100, 0, 0});
  try {
    render_frame(map, away, k, noise, 5);
    FAIL("expected NoVisibleLines");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoVisibleLines);
  }
}

TEST_CASE("initial guess perturbation follows the configured spread") {
  const auto k = default_camera();
  SceneConfig sc;
  sc.line_count = 150;
  const auto map = generate_map(sc);
  const Pose pose = look_at_pose({2, 0, 0}, {0, 0, 0});
  NoiseModel noise;
  noise.guess_sigma_t = 0.1;
  noise.guess_sigma_r = 0.02;
  double st = 0.0;
  double sr = 0.0;
  const int n = 400;
  for (int i = 0; i < n; ++i) {
    const SimFrame f = render_frame(map, pose, k, noise, derive_seed(3, i));
    const Vec6 d = log_map(f.initial_guess * pose.inverse()).vector();
    st += d.head<3>().squaredNorm();
    sr += d.tail<3>().squaredNorm();
  }
  CHECK(std::sqrt(st / (3 * n)) == doctest::Approx(0.1).epsilon(0.1));
  CHECK(std::sqrt(sr / (3 * n)) == doctest::Approx(0.02).epsilon(0.1));
}

TEST_CASE("derive_seed") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 3; ++s)
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(s, i));
  CHECK(seen.size() == 3000);
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
}

TEST_CASE("noise model validation") {
  NoiseModel n;
  CHECK_NOTHROW(n.validate());
  n.sigma_px = -1.0;
  CHECK_THROWS_AS(n.validate(), Error);
  n = {};
  n.outlier_count = -1;
  CHECK_THROWS_AS(n.validate(), Error);
}
