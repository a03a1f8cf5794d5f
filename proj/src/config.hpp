#pragma once

#include "estimator.hpp"
#include "integrity.hpp"
#include "matching.hpp"
#include "simulator.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace linteg {

struct SimulationConfig {
  std::uint64_t seed = 0;
  CameraIntrinsics camera = default_camera();
  SceneConfig scene;
  TrajectoryConfig trajectory;
  NoiseModel noise;
  double min_projected_length = 5.0;
};

enum class Association {
  // match_lines against the projected map at the initial guess
  Match,
  // use the per-detection map_id labels carried by the frames file
  Labels,
};

struct RunConfig {
  std::optional<CameraIntrinsics> camera;
  // When set, frame initial guesses are world -> body and are composed with
  // this body -> camera extrinsic.
  std::optional<Pose> extrinsic_bc;
  MatchThresholds matching;
  double sigma_px = 2.6457513110645907;  // sqrt(7)
  IntegrityConfig integrity;
  SolveOptions solver;
  Association association = Association::Match;
  // Worker threads for frame processing; 0 picks the hardware count.
  int threads = 0;
  std::uint64_t seed = 0;
  // Rigidly align estimates to ground truth before ATE (cross-check only).
  bool align = false;
  // Timestamp association window against ground truth, seconds.
  double max_time_diff = 0.01;
};

// Both parsers read a single JSON document; unknown keys are ignored and
// missing keys keep their defaults. Scene/trajectory/noise live under
// "scene", "trajectory", "noise"; matching under "matching"; integrity
// parameters under "integrity". Throws ParseError / InvariantViolation.
SimulationConfig parse_simulation_config(const std::string& json_text);
RunConfig parse_run_config(const std::string& json_text);

std::string dump_run_config(const RunConfig& cfg);

}  // namespace linteg
