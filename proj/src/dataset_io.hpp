#pragma once

#include "geometry.hpp"
#include "simulator.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace linteg {

struct FrameData {
  double timestamp = 0.0;
  Pose initial_guess;  // world -> camera (or world -> body with an extrinsic)
  std::vector<Line2D> detections;
  std::vector<int> detection_ids;
  // Optional association label per detection.
  std::vector<std::optional<int>> map_ids;
  std::vector<int> injected_outlier_ids;
};

struct Dataset {
  std::vector<LineSegment3D> map;
  std::vector<FrameData> frames;
  std::vector<StampedPose> ground_truth;
  std::optional<CameraIntrinsics> camera;
};

// File names used inside a dataset directory.
inline constexpr const char* kMapFile = "map.json";
inline constexpr const char* kFramesFile = "frames.json";
inline constexpr const char* kTrajectoryFile = "groundtruth.tum";
inline constexpr const char* kCameraFile = "camera.json";

FrameData to_frame_data(const SimFrame& frame);

// Parsers throw ParseError (with location) or InvariantViolation (naming the
// field); file readers add IoError for unreadable paths.
std::vector<LineSegment3D> parse_map(const std::string& text);
std::vector<FrameData> parse_frames(const std::string& text);
std::vector<StampedPose> parse_trajectory(const std::string& text);
CameraIntrinsics parse_camera(const std::string& text);

std::string format_map(const std::vector<LineSegment3D>& map);
std::string format_frames(const std::vector<FrameData>& frames);
// TUM lines "timestamp tx ty tz qx qy qz qw" holding the camera -> world
// pose; input poses are world -> camera.
std::string format_trajectory(const std::vector<StampedPose>& poses);
std::string format_camera(const CameraIntrinsics& k);

std::vector<LineSegment3D> load_map(const std::filesystem::path& path);
std::vector<FrameData> load_frames(const std::filesystem::path& path);
std::vector<StampedPose> load_trajectory(const std::filesystem::path& path);
CameraIntrinsics load_camera(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// Writes map.json, frames.json, groundtruth.tum and (when known)
// camera.json into dir.
void export_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset_dir(const std::filesystem::path& dir);

// Full-precision decimal for doubles ("%.17g").
std::string format_double(double v);

}  // namespace linteg
