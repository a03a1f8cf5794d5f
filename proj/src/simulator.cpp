#include "simulator.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace linteg {

void SceneConfig::validate() const {
  if (line_count < 1) {
    throw Error(ErrorCode::InvariantViolation, "scene: line_count must be >= 1");
  }
  if (!(extent > 0.0) || !(min_length > 0.0) || max_length < min_length) {
    throw Error(ErrorCode::InvariantViolation,
                "scene: need extent > 0 and 0 < min_length <= max_length");
  }
  if (axis_aligned_fraction < 0.0 || random_fraction < 0.0 ||
      std::abs(axis_aligned_fraction + random_fraction - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvariantViolation,
                "scene: orientation fractions must be non-negative and sum to 1");
  }
}

void NoiseModel::validate() const {
  if (sigma_px < 0.0 || outlier_count < 0 || outlier_bias_px < 0.0 ||
      guess_sigma_t < 0.0 || guess_sigma_r < 0.0) {
    throw Error(ErrorCode::InvariantViolation,
                "noise model: all parameters must be non-negative");
  }
}

void TrajectoryConfig::validate() const {
  if (steps < 1 || !(rate_hz > 0.0)) {
    throw Error(ErrorCode::InvariantViolation,
                "trajectory: need steps >= 1 and rate_hz > 0");
  }
  if (kind == TrajectoryKind::Circle) {
    if (!(radius > 0.0)) {
      throw Error(ErrorCode::InvariantViolation, "trajectory: radius must be > 0");
    }
    if (steps > 1 && 2.0 * std::numbers::pi / steps >= max_angular_step) {
      throw Error(ErrorCode::InvariantViolation,
                  "trajectory: too few steps for max_angular_step");
    }
  } else if (waypoints.empty()) {
    throw Error(ErrorCode::InvariantViolation,
                "trajectory: waypoints must not be empty");
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

CameraIntrinsics default_camera() {
  CameraIntrinsics k;
  k.width = 752;
  k.height = 480;
  k.fx = 0.5 * k.width / std::tan(35.0 * std::numbers::pi / 180.0);
  k.fy = k.fx;
  k.cx = 0.5 * k.width;
  k.cy = 0.5 * k.height;
  return k;
}

namespace {

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(normal(rng), normal(rng), normal(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

}  // namespace

std::vector<LineSegment3D> generate_map(const SceneConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> face_pick(0, 5);
  std::uniform_int_distribution<int> wall_pick(0, 3);
  std::uniform_int_distribution<int> coin(0, 1);

  const double e = cfg.extent;
  const int aligned = cfg.layout == SceneLayout::Parallel
                          ? cfg.line_count
                          : static_cast<int>(std::lround(cfg.line_count *
                                                         cfg.axis_aligned_fraction));
  std::vector<LineSegment3D> map;
  map.reserve(static_cast<std::size_t>(cfg.line_count));
  for (int i = 0; i < cfg.line_count; ++i) {
    const double length =
        cfg.min_length + (cfg.max_length - cfg.min_length) * unit(rng);
    LineSegment3D seg;
    seg.id = i;
    if (i < aligned) {
      // face normal axis and side; parallel scenes use the walls only
      int normal_axis;
      double side;
      int dir_axis;
      if (cfg.layout == SceneLayout::Parallel) {
        const int wall = wall_pick(rng);
        normal_axis = wall % 2;
        side = wall < 2 ? 1.0 : -1.0;
        dir_axis = 2;
      } else {
        const int face = face_pick(rng);
        normal_axis = face % 3;
        side = face < 3 ? 1.0 : -1.0;
        const int a = (normal_axis + 1) % 3;
        const int b = (normal_axis + 2) % 3;
        dir_axis = coin(rng) ? a : b;
      }
      Vec3 center;
      for (int ax = 0; ax < 3; ++ax) {
        center(ax) = (2.0 * unit(rng) - 1.0) * 0.8 * e;
      }
      center(normal_axis) = side * e;
      Vec3 dir = Vec3::Zero();
      dir(dir_axis) = 1.0;
      const double half = std::min(0.5 * length, e - std::abs(center(dir_axis)));
      seg.p_start = center - half * dir;
      seg.p_end = center + half * dir;
      if (half < 0.05) {
        // too close to a box edge; recentre along the direction
        center(dir_axis) = 0.0;
        seg.p_start = center - 0.5 * length * dir;
        seg.p_end = center + 0.5 * length * dir;
      }
    } else {
      const int face = face_pick(rng);
      const int normal_axis = face % 3;
      const double side = face < 3 ? 1.0 : -1.0;
      Vec3 center;
      for (int ax = 0; ax < 3; ++ax) {
        center(ax) = (2.0 * unit(rng) - 1.0) * 0.7 * e;
      }
      center(normal_axis) = side * e * (1.0 - 0.3 * unit(rng));
      const Vec3 dir = random_unit(rng);
      seg.p_start = center - 0.5 * length * dir;
      seg.p_end = center + 0.5 * length * dir;
    }
    map.push_back(seg);
  }
  return map;
}

Pose look_at_pose(const Vec3& position, const Vec3& target) {
  const Vec3 forward = (target - position).normalized();
  Vec3 up = Vec3::UnitZ();
  if (std::abs(forward.dot(up)) > 0.999) up = Vec3::UnitY();
  const Vec3 down = -(up - up.dot(forward) * forward).normalized();
  const Vec3 right = down.cross(forward);
  Mat3 r_cw;
  r_cw.row(0) = right.transpose();
  r_cw.row(1) = down.transpose();
  r_cw.row(2) = forward.transpose();
  return Pose::from_matrix(r_cw, -r_cw * position);
}

std::vector<StampedPose> generate_trajectory(const TrajectoryConfig& cfg) {
  cfg.validate();
  std::vector<StampedPose> out;
  out.reserve(static_cast<std::size_t>(cfg.steps));
  if (cfg.kind == TrajectoryKind::Circle) {
    for (int i = 0; i < cfg.steps; ++i) {
      const double theta = 2.0 * std::numbers::pi * i / cfg.steps;
      const Vec3 position =
          cfg.center + cfg.radius * Vec3(std::cos(theta), std::sin(theta), 0.0);
      out.push_back({cfg.start_time + i / cfg.rate_hz, look_at_pose(position, cfg.look_at)});
    }
    return out;
  }

  // cumulative arc length along the polyline
  std::vector<double> cumulative{0.0};
  for (std::size_t i = 1; i < cfg.waypoints.size(); ++i) {
    cumulative.push_back(cumulative.back() +
                         (cfg.waypoints[i] - cfg.waypoints[i - 1]).norm());
  }
  const double total = cumulative.back();
  for (int i = 0; i < cfg.steps; ++i) {
    Vec3 position = cfg.waypoints.front();
    if (total > 0.0 && cfg.steps > 1) {
      const double s = total * i / (cfg.steps - 1);
      std::size_t seg = 1;
      while (seg + 1 < cumulative.size() && cumulative[seg] < s) ++seg;
      const double span = cumulative[seg] - cumulative[seg - 1];
      const double t = span > 0.0 ? (s - cumulative[seg - 1]) / span : 0.0;
      position = cfg.waypoints[seg - 1] +
                 std::clamp(t, 0.0, 1.0) * (cfg.waypoints[seg] - cfg.waypoints[seg - 1]);
    }
    out.push_back({cfg.start_time + i / cfg.rate_hz, look_at_pose(position, cfg.look_at)});
  }
  return out;
}

SimFrame render_frame(std::span<const LineSegment3D> map, const Pose& true_pose,
                      const CameraIntrinsics& k, const NoiseModel& noise,
                      std::uint64_t seed, double timestamp,
                      double min_projected_length) {
  noise.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  struct Visible {
    LineSegment3D clipped;
    Vec2 ps;
    Vec2 pe;
  };
  std::vector<Visible> visible;
  for (const auto& segment : map) {
    const auto clipped = clip_to_view(segment, true_pose, k);
    if (!clipped) continue;
    const Vec2 ps = project(true_pose, k, clipped->p_start);
    const Vec2 pe = project(true_pose, k, clipped->p_end);
    if ((pe - ps).norm() < std::max(min_projected_length, 1e-6)) continue;
    visible.push_back({*clipped, ps, pe});
  }
  if (visible.empty()) {
    throw Error(ErrorCode::NoVisibleLines, "no map line is visible from the pose");
  }

  SimFrame frame;
  frame.timestamp = timestamp;
  frame.true_pose = true_pose;

  std::vector<Vec2> starts;
  std::vector<Vec2> ends;
  for (const auto& v : visible) {
    Vec2 ps = v.ps;
    Vec2 pe = v.pe;
    if (noise.sigma_px > 0.0) {
      ps += noise.sigma_px * Vec2(normal(rng), normal(rng));
      pe += noise.sigma_px * Vec2(normal(rng), normal(rng));
    }
    starts.push_back(ps);
    ends.push_back(pe);
  }

  std::vector<int> label(visible.size());
  std::vector<LineSegment3D> source(visible.size());
  std::vector<bool> keep(visible.size(), true);
  for (std::size_t i = 0; i < visible.size(); ++i) {
    label[i] = visible[i].clipped.id;
    source[i] = visible[i].clipped;
  }

  std::vector<std::size_t> order(visible.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  const std::size_t wanted =
      std::min(static_cast<std::size_t>(noise.outlier_count), visible.size());
  std::vector<bool> touched(visible.size(), false);
  std::size_t injected = 0;
  for (std::size_t o = 0; o < order.size() && injected < wanted; ++o) {
    const std::size_t i = order[o];
    if (touched[i] || !keep[i]) continue;
    if (noise.outlier_mode == OutlierMode::Offset) {
      const Line2D fitted = line_from_endpoints(starts[i], ends[i]);
      const double sign = std::uniform_int_distribution<int>(0, 1)(rng) ? 1.0 : -1.0;
      const Vec2 shift = sign * noise.outlier_bias_px * fitted.normal();
      starts[i] += shift;
      ends[i] += shift;
      touched[i] = true;
      frame.injected_outlier_ids.push_back(label[i]);
      ++injected;
    } else {
      // Pair detection i with its nearest visible neighbour in the image;
      // the neighbour's own detection is dropped so labels stay unique.
      const Vec2 mid = 0.5 * (visible[i].ps + visible[i].pe);
      std::size_t best = visible.size();
      double best_dist = 0.0;
      for (std::size_t j = 0; j < visible.size(); ++j) {
        if (j == i || touched[j] || !keep[j]) continue;
        const double d = (0.5 * (visible[j].ps + visible[j].pe) - mid).norm();
        if (best == visible.size() || d < best_dist) {
          best = j;
          best_dist = d;
        }
      }
      if (best == visible.size()) continue;
      label[i] = label[best];
      source[i] = source[best];
      keep[best] = false;
      touched[i] = true;
      touched[best] = true;
      frame.injected_outlier_ids.push_back(label[i]);
      ++injected;
    }
  }

  for (std::size_t i = 0; i < visible.size(); ++i) {
    if (!keep[i]) continue;
    frame.detections.push_back(line_from_endpoints(starts[i], ends[i]));
    frame.ground_truth_matches.push_back(label[i]);
    frame.source_segments.push_back(source[i]);
  }
  std::sort(frame.injected_outlier_ids.begin(), frame.injected_outlier_ids.end());

  Twist perturbation;
  for (int a = 0; a < 3; ++a) {
    perturbation.rho(a) = noise.guess_sigma_t * normal(rng);
    perturbation.phi(a) = noise.guess_sigma_r * normal(rng);
  }
  frame.initial_guess = apply_left_perturbation(true_pose, perturbation);
  return frame;
}

std::vector<Correspondence> ground_truth_correspondences(const SimFrame& frame) {
  std::vector<Correspondence> out;
  out.reserve(frame.detections.size());
  for (std::size_t i = 0; i < frame.detections.size(); ++i) {
    Correspondence c;
    c.map_line_id = frame.ground_truth_matches[i];
    c.detection_index = static_cast<int>(i);
    c.detected_line = frame.detections[i];
    c.map_segment = frame.source_segments[i];
    c.projected_line = c.detected_line;
    out.push_back(c);
  }
  return out;
}

}  // namespace linteg
