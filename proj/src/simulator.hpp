#pragma once

#include "geometry.hpp"
#include "matching.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace linteg {

enum class SceneLayout {
  // Axis-aligned segments on the faces of a box plus random directions.
  Manhattan,
  // Every segment vertical; translation along z is unobservable.
  Parallel,
};

struct SceneConfig {
  int line_count = 40;
  double extent = 4.0;  // box half-size, meters
  double axis_aligned_fraction = 0.7;
  double random_fraction = 0.3;
  double min_length = 1.0;
  double max_length = 3.0;
  SceneLayout layout = SceneLayout::Manhattan;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class OutlierMode { Offset, Mismatch };

struct NoiseModel {
  double sigma_px = 1.0;
  int outlier_count = 0;
  double outlier_bias_px = 30.0;
  OutlierMode outlier_mode = OutlierMode::Offset;
  double guess_sigma_t = 0.03;
  double guess_sigma_r = 0.005;

  void validate() const;
};

enum class TrajectoryKind { Circle, Waypoints };

struct TrajectoryConfig {
  TrajectoryKind kind = TrajectoryKind::Circle;
  Vec3 center = Vec3::Zero();
  double radius = 2.0;
  int steps = 100;
  double rate_hz = 20.0;
  double start_time = 0.0;
  Vec3 look_at = Vec3::Zero();
  // Circle: the camera looks at look_at. Waypoints: positions are
  // interpolated by arc length, the camera looks at look_at.
  std::vector<Vec3> waypoints;
  double max_angular_step = 0.2;  // rad

  void validate() const;
};

struct StampedPose {
  double timestamp = 0.0;
  Pose pose_wc;
};

struct SimFrame {
  double timestamp = 0.0;
  Pose true_pose;
  Pose initial_guess;
  std::vector<Line2D> detections;
  // Association label per detection (the map line it is paired with).
  std::vector<int> ground_truth_matches;
  // View-clipped 3D segment of the labelled map line, per detection.
  std::vector<LineSegment3D> source_segments;
  std::vector<int> injected_outlier_ids;
};

std::vector<LineSegment3D> generate_map(const SceneConfig& cfg);

std::vector<StampedPose> generate_trajectory(const TrajectoryConfig& cfg);

// Camera at `position` looking at `target` with world +z up; image y points
// down.
Pose look_at_pose(const Vec3& position, const Vec3& target);

// Throws NoVisibleLines when no map line survives the view cull.
SimFrame render_frame(std::span<const LineSegment3D> map, const Pose& true_pose,
                      const CameraIntrinsics& k, const NoiseModel& noise,
                      std::uint64_t seed, double timestamp = 0.0,
                      double min_projected_length = 5.0);

// Correspondences exactly as labelled by the simulator.
std::vector<Correspondence> ground_truth_correspondences(const SimFrame& frame);

// Independent per-frame seed derived from a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// 752x480 sensor with a ~70 degree horizontal field of view.
CameraIntrinsics default_camera();

}  // namespace linteg
