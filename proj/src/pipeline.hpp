#pragma once

#include "config.hpp"
#include "dataset_io.hpp"
#include "integrity.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace linteg {

enum class FrameStatus { Ok, Unavailable, NoMatch };

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr std::array<double, 6> kNaN6 = {kNaN, kNaN, kNaN, kNaN, kNaN, kNaN};
const char* to_string(FrameStatus status);

struct FrameRecord {
  std::size_t index = 0;
  double timestamp = 0.0;
  FrameStatus status = FrameStatus::NoMatch;
  // Short machine-readable cause for non-ok frames.
  std::string reason;
  Pose pose;  // world -> camera
  int matches = 0;
  int rows = 0;
  int dof = 0;
  double wsse = kNaN;
  double td = kNaN;
  std::vector<int> excluded;
  // [rho; phi] components of log(T_est * T_true^-1); NaN without truth.
  std::array<double, 6> error = kNaN6;
  std::array<double, 6> pl = kNaN6;
  std::array<double, 6> three_sigma = kNaN6;
  double icn = kNaN;
};

struct Summary {
  std::size_t frame_count = 0;
  std::size_t ok_count = 0;
  double availability = 0.0;
  double ate_rmse = 0.0;
  std::size_t evaluated_frames = 0;
  bool aligned = false;
  std::array<double, 6> bound_rate_pl{};
  std::array<double, 6> bound_rate_three_sigma{};
  std::array<double, 6> mean_pl{};
};

// Tangent-space error of an estimate against the truth, [rho; phi].
std::array<double, 6> pose_error(const Pose& estimate_wc, const Pose& truth_wc);

// Index of the ground-truth sample nearest in time within max_dt, or -1.
long nearest_truth(const std::vector<StampedPose>& truth, double timestamp,
                   double max_dt);

// Processes a single frame; never throws for per-frame failures.
FrameRecord process_frame(const FrameData& frame, std::size_t index,
                          const std::vector<LineSegment3D>& map,
                          const CameraIntrinsics& k, const RunConfig& cfg);

// One record per input frame, in input order. Frames are processed on a
// worker pool; results do not depend on the thread count.
std::vector<FrameRecord> run_pipeline(const Dataset& dataset, const RunConfig& cfg);

// Per-frame errors are recomputed from the record poses against truth.
// Throws NoOverlap when no ok frame associates with the ground truth.
Summary evaluate(std::vector<FrameRecord>& records,
                 const std::vector<StampedPose>& truth, bool align = false,
                 double max_dt = 0.01);

// Column names of frames.csv, in order.
const std::vector<std::string>& frame_csv_columns();
std::string format_frames_csv(const std::vector<FrameRecord>& records);
std::vector<FrameRecord> parse_frames_csv(const std::string& text);
std::string format_summary_json(const Summary& summary);
std::string format_plot_csv(const std::vector<FrameRecord>& records, Axis axis);

// frames.csv and plot_<axis>.csv under out_dir, plus summary.json when a
// summary is given.
void emit_reports(const std::vector<FrameRecord>& records, const Summary* summary,
                  const std::filesystem::path& out_dir);

// Map, trajectory and one rendered frame per pose. Frames whose view holds
// no map line are kept with zero detections.
Dataset simulate_dataset(const SimulationConfig& cfg);

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware).
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace linteg
