#include "doctest.h"

#include "error.hpp"
#include "matching.hpp"
#include "simulator.hpp"
#include "test_support.hpp"

#include <numbers>
#include <set>

using namespace linteg;

namespace {

Line2D seg(Vec2 a, Vec2 b) { return line_from_endpoints(a, b); }

void check_thresholds(const std::vector<Correspondence>& corrs, const MatchThresholds& th) {
  std::set<int> ids;
  std::set<int> dets;
  for (const auto& c : corrs) {
    CHECK(ids.insert(c.map_line_id).second);
    CHECK(dets.insert(c.detection_index).second);
    CHECK(c.mean_distance >= 0.0);
    CHECK(c.mean_distance <= th.mean_distance_max);
    CHECK(c.angle >= 0.0);
    CHECK(c.angle <= th.angle_max);
    CHECK(c.overlap >= th.overlap_min);
    CHECK(c.overlap <= 1.0);
    // score components recomputed independently
    const double mean = sampled_distance(c.detected_line, c.projected_line, th.sample_count) /
                        th.sample_count;
    CHECK(mean == doctest::Approx(c.mean_distance).epsilon(1e-12));
  }
}

}  // namespace

TEST_CASE("sampled_distance") {
  const Line2D x_axis = seg({0, 0}, {1, 0});
  CHECK(sampled_distance(seg({2, 0}, {5, 0}), x_axis, 10) == doctest::Approx(0.0));
  CHECK(sampled_distance(seg({0, 1}, {1, 1}), x_axis, 2) == doctest::Approx(2.0));
  CHECK(sampled_distance(seg({0, 0}, {0, 2}), x_axis, 3) == doctest::Approx(3.0));
  // samples at t = 0, 1/4, ..., 1 of a slope: 0 + 0.5 + 1 + 1.5 + 2
  CHECK(sampled_distance(seg({0, 0}, {4, 2}), x_axis, 5) == doctest::Approx(5.0));
}

TEST_CASE("angle_between") {
  const Line2D x_axis = seg({0, 0}, {1, 0});
  CHECK(angle_between(x_axis, seg({5, 0}, {-3, 0})) == doctest::Approx(0.0));
  CHECK(angle_between(x_axis, seg({0, 0}, {0, 1})) == doctest::Approx(std::numbers::pi / 2));
  CHECK(angle_between(x_axis, seg({0, 0}, {1, 1})) == doctest::Approx(std::numbers::pi / 4));
  // reversed direction is still acute
  CHECK(angle_between(x_axis, seg({1, 1}, {0, 0})) == doctest::Approx(std::numbers::pi / 4));
}

TEST_CASE("overlap_ratio") {
  const Line2D p = seg({0, 0}, {2, 0});
  CHECK(overlap_ratio(p, p) == doctest::Approx(1.0));
  CHECK(overlap_ratio(p, seg({3, 0}, {5, 0})) == doctest::Approx(0.0));
  CHECK(overlap_ratio(p, seg({1, 0.1}, {3, 0.1})) == doctest::Approx(0.5));
  CHECK(overlap_ratio(p, seg({-5, 0}, {5, 0})) == doctest::Approx(1.0));
  CHECK(overlap_ratio(p, seg({0.5, 1}, {0.5, 2})) == doctest::Approx(0.0));
}

TEST_CASE("thresholds validate") {
  MatchThresholds th;
  CHECK_NOTHROW(th.validate());
  th.sample_count = 1;
  CHECK_THROWS_AS(th.validate(), Error);
  th = {};
  th.overlap_min = 1.5;
  CHECK_THROWS_AS(th.validate(), Error);
  th = {};
  th.mean_distance_max = 0.0;
  CHECK_THROWS_AS(th.validate(), Error);
}

TEST_CASE("match_lines on exact projections is a perfect matching") {
  const auto k = default_camera();
  SceneConfig sc;
  sc.line_count = 80;
  sc.seed = 4;
  const auto map = generate_map(sc);
  const Pose pose = look_at_pose({1.5, 0.5, 0.3}, {0, 0, 0});
  const SimFrame frame = testing::clean_frame(map, pose, k);
  REQUIRE(frame.detections.size() >= 8);

  const MatchThresholds th;
  const auto corrs = match_lines(map, frame.detections, pose, k, th);
  CHECK(corrs.size() == frame.detections.size());
  for (const auto& c : corrs) {
    CHECK(c.map_line_id == frame.ground_truth_matches[c.detection_index]);
    CHECK(c.mean_distance < 1e-6);
  }
  check_thresholds(corrs, th);

  // output is in map order
  for (std::size_t i = 1; i < corrs.size(); ++i) {
    CHECK(corrs[i - 1].map_line_id < corrs[i].map_line_id);
  }
  CHECK(match_lines(map, {}, pose, k, th).empty());
}

TEST_CASE("greedy assignment picks the closer detection") {
  CameraIntrinsics k;
  k.fx = k.fy = 500;
  k.cx = 320;
  k.cy = 240;
  k.width = 640;
  k.height = 480;
  // one horizontal map line at depth 5
  std::vector<LineSegment3D> map = {{7, {-1, 0, 5}, {1, 0, 5}}};
  const Vec2 a = project(Pose::identity(), k, map[0].p_start);
  const Vec2 b = project(Pose::identity(), k, map[0].p_end);
  std::vector<Line2D> det = {seg(a + Vec2(0, 4), b + Vec2(0, 4)),
                             seg(a + Vec2(0, 1), b + Vec2(0, 1))};
  const auto corrs = match_lines(map, det, Pose::identity(), k, {});
  REQUIRE(corrs.size() == 1);
  CHECK(corrs[0].detection_index == 1);
  CHECK(corrs[0].mean_distance == doctest::Approx(1.0));

  // beyond 10 px nothing matches
  det = {seg(a + Vec2(0, 11), b + Vec2(0, 11))};
  CHECK(match_lines(map, det, Pose::identity(), k, {}).empty());
  // tilted by more than 5 degrees nothing matches
  const Vec2 mid = 0.5 * (a + b);
  const double t = 6.0 * std::numbers::pi / 180.0;
  const Vec2 dir(std::cos(t), std::sin(t));
  det = {seg(mid - 100 * dir, mid + 100 * dir)};
  CHECK(match_lines(map, det, Pose::identity(), k, {}).empty());
}

TEST_CASE("matching is deterministic and an injection under noise") {
  const auto k = default_camera();
  SceneConfig sc;
  sc.seed = 8;
  const auto map = generate_map(sc);
  NoiseModel noise;
  noise.sigma_px = 1.0;
  const auto traj = generate_trajectory({});
  for (std::size_t i = 0; i < traj.size(); i += 10) {
    SimFrame f;
    try {
      f = render_frame(map, traj[i].pose_wc, k, noise, derive_seed(8, i));
    } catch (const Error&) {
      continue;
    }
    const MatchThresholds th;
    const auto c1 = match_lines(map, f.detections, f.initial_guess, k, th);
    const auto c2 = match_lines(map, f.detections, f.initial_guess, k, th);
    REQUIRE(c1.size() == c2.size());
    for (std::size_t j = 0; j < c1.size(); ++j) {
      CHECK(c1[j].map_line_id == c2[j].map_line_id);
      CHECK(c1[j].detection_index == c2[j].detection_index);
    }
    check_thresholds(c1, th);
  }
}

TEST_CASE("at 1 px noise at least 90% of visible lines are matched correctly") {
  const auto k = default_camera();
  const auto map = generate_map({});
  NoiseModel noise;
  noise.sigma_px = 1.0;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);
  std::uniform_real_distribution<double> height(-0.5, 0.5);
  std::size_t visible = 0;
  std::size_t correct = 0;
  int frames = 0;
  for (std::uint64_t s = 0; frames < 100; ++s) {
    const double th = angle(rng);
    const Vec3 pos(2.0 * std::cos(th), 2.0 * std::sin(th), height(rng));
    const Pose pose = look_at_pose(pos, {0, 0, 0});
    SimFrame f;
    try {
      f = render_frame(map, pose, k, noise, derive_seed(31, s));
    } catch (const Error&) {
      continue;
    }
    ++frames;
    visible += f.detections.size();
    for (const auto& c : match_lines(map, f.detections, f.initial_guess, k, {})) {
      if (f.ground_truth_matches[c.detection_index] == c.map_line_id) ++correct;
    }
  }
  const double rate = static_cast<double>(correct) / static_cast<double>(visible);
  MESSAGE("correct match rate " << rate << " over " << visible << " visible lines");
  CHECK(rate >= 0.90);
}
