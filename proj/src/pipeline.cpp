#include "pipeline.hpp"

#include "error.hpp"

#include "json.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace linteg {

const char* to_string(FrameStatus status) {
  switch (status) {
    case FrameStatus::Ok: return "ok";
    case FrameStatus::Unavailable: return "unavailable";
    case FrameStatus::NoMatch: return "no_match";
  }
  return "?";
}

std::array<double, 6> pose_error(const Pose& estimate_wc, const Pose& truth_wc) {
  const Vec6 e = log_map(estimate_wc * truth_wc.inverse()).vector();
  return {e(0), e(1), e(2), e(3), e(4), e(5)};
}

long nearest_truth(const std::vector<StampedPose>& truth, double timestamp,
                   double max_dt) {
  if (truth.empty()) return -1;
  auto it = std::lower_bound(truth.begin(), truth.end(), timestamp,
                             [](const StampedPose& p, double t) { return p.timestamp < t; });
  long best = -1;
  double best_dt = max_dt;
  for (auto cand : {it, it == truth.begin() ? it : std::prev(it)}) {
    if (cand == truth.end()) continue;
    const double dt = std::abs(cand->timestamp - timestamp);
    if (dt <= best_dt) {
      best_dt = dt;
      best = static_cast<long>(cand - truth.begin());
    }
  }
  return best;
}

namespace {

std::vector<Correspondence> labelled_correspondences(
    const FrameData& frame, const std::vector<LineSegment3D>& map,
    const Pose& guess, const CameraIntrinsics& k) {
  std::unordered_map<int, std::size_t> by_id;
  for (std::size_t i = 0; i < map.size(); ++i) by_id.emplace(map[i].id, i);
  std::vector<Correspondence> out;
  std::vector<int> used;
  for (std::size_t d = 0; d < frame.detections.size(); ++d) {
    if (d >= frame.map_ids.size() || !frame.map_ids[d]) continue;
    const int id = *frame.map_ids[d];
    const auto it = by_id.find(id);
    if (it == by_id.end()) continue;
    if (std::find(used.begin(), used.end(), id) != used.end()) continue;
    const auto projected = project_map_line(map[it->second], guess, k, 0.0);
    if (!projected) continue;
    Correspondence c;
    c.map_line_id = id;
    c.detection_index = static_cast<int>(d);
    c.detected_line = frame.detections[d];
    c.map_segment = projected->first;
    c.projected_line = projected->second;
    out.push_back(c);
    used.push_back(id);
  }
  return out;
}

void fill_errors(std::vector<FrameRecord>& records,
                 const std::vector<StampedPose>& truth, double max_dt) {
  for (auto& rec : records) {
    const long t = nearest_truth(truth, rec.timestamp, max_dt);
    rec.error = t < 0 ? kNaN6 : pose_error(rec.pose, truth[static_cast<std::size_t>(t)].pose_wc);
  }
}

}  // namespace

FrameRecord process_frame(const FrameData& frame, std::size_t index,
                          const std::vector<LineSegment3D>& map,
                          const CameraIntrinsics& k, const RunConfig& cfg) {
  FrameRecord rec;
  rec.index = index;
  rec.timestamp = frame.timestamp;
  const Pose guess = cfg.extrinsic_bc
                         ? world_to_camera(frame.initial_guess, *cfg.extrinsic_bc)
                         : frame.initial_guess;
  rec.pose = guess;

  std::vector<Correspondence> corrs;
  try {
    corrs = cfg.association == Association::Match
                ? match_lines(map, frame.detections, guess, k, cfg.matching)
                : labelled_correspondences(frame, map, guess, k);
  } catch (const Error& e) {
    rec.status = FrameStatus::NoMatch;
    rec.reason = to_string(e.code());
    return rec;
  }
  rec.matches = static_cast<int>(corrs.size());
  if (rec.matches < std::max(cfg.integrity.min_lines, kMinCorrespondences)) {
    rec.status = FrameStatus::NoMatch;
    rec.reason = "too_few_matches";
    return rec;
  }

  try {
    const FdeReport f = fde(corrs, guess, k, cfg.sigma_px, cfg.integrity, cfg.solver);
    rec.pose = f.surviving_pose;
    rec.excluded = f.excluded_line_ids;
    const FdeRound& last = f.wsse_history.back();
    rec.wsse = last.wsse;
    rec.td = last.threshold;
    rec.rows = last.rows;
    rec.dof = last.dof;
    if (!f.passed) {
      rec.status = FrameStatus::Unavailable;
      rec.reason = "fde_failed";
      return rec;
    }
    const PlReport pl = protection_level(f, cfg.integrity);
    rec.pl = pl.pl;
    for (Axis axis : kAllAxes) {
      rec.three_sigma[static_cast<int>(axis)] = noise_term(f.surviving_system, axis, 3.0);
    }
    rec.icn = pl.icn;
    rec.status = FrameStatus::Ok;
  } catch (const Error& e) {
    rec.status = e.code() == ErrorCode::InsufficientObservations ? FrameStatus::NoMatch
                                                                 : FrameStatus::Unavailable;
    rec.reason = to_string(e.code());
  }
  return rec;
}

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn) {
  std::size_t workers =
      threads > 0 ? static_cast<std::size_t>(threads)
                  : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

Dataset simulate_dataset(const SimulationConfig& cfg) {
  Dataset ds;
  ds.camera = cfg.camera;
  SceneConfig scene = cfg.scene;
  scene.seed = cfg.seed;
  ds.map = generate_map(scene);
  ds.ground_truth = generate_trajectory(cfg.trajectory);
  ds.frames.reserve(ds.ground_truth.size());
  for (std::size_t i = 0; i < ds.ground_truth.size(); ++i) {
    const StampedPose& sp = ds.ground_truth[i];
    try {
      ds.frames.push_back(to_frame_data(render_frame(
          ds.map, sp.pose_wc, cfg.camera, cfg.noise, derive_seed(cfg.seed, i + 1),
          sp.timestamp, cfg.min_projected_length)));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoVisibleLines) throw;
      FrameData empty;
      empty.timestamp = sp.timestamp;
      empty.initial_guess = sp.pose_wc;
      ds.frames.push_back(std::move(empty));
    }
  }
  return ds;
}

std::vector<FrameRecord> run_pipeline(const Dataset& dataset, const RunConfig& cfg) {
  const std::optional<CameraIntrinsics> camera = cfg.camera ? cfg.camera : dataset.camera;
  if (!camera) {
    throw Error(ErrorCode::InvariantViolation,
                "run config: camera intrinsics are required (config or dataset)");
  }
  camera->validate();
  cfg.matching.validate();
  cfg.integrity.validate();
  if (dataset.map.empty()) {
    throw Error(ErrorCode::InvariantViolation, "map has zero lines");
  }

  std::vector<FrameRecord> records(dataset.frames.size());
  parallel_for(dataset.frames.size(), cfg.threads, [&](std::size_t i) {
    records[i] = process_frame(dataset.frames[i], i, dataset.map, *camera, cfg);
  });
  fill_errors(records, dataset.ground_truth, cfg.max_time_diff);
  return records;
}

Summary evaluate(std::vector<FrameRecord>& records,
                 const std::vector<StampedPose>& truth, bool align, double max_dt) {
  fill_errors(records, truth, max_dt);
  Summary s;
  s.frame_count = records.size();
  s.aligned = align;

  std::vector<const FrameRecord*> scored;
  std::vector<Vec3> est_centres;
  std::vector<Vec3> true_centres;
  std::array<double, 6> pl_sum{};
  for (const auto& rec : records) {
    if (rec.status != FrameStatus::Ok) continue;
    ++s.ok_count;
    for (int a = 0; a < 6; ++a) pl_sum[a] += rec.pl[a];
    const long t = nearest_truth(truth, rec.timestamp, max_dt);
    if (t < 0) continue;
    scored.push_back(&rec);
    est_centres.push_back(rec.pose.inverse().translation);
    true_centres.push_back(truth[static_cast<std::size_t>(t)].pose_wc.inverse().translation);
  }
  s.availability = s.frame_count == 0 ? 0.0
                                      : static_cast<double>(s.ok_count) / s.frame_count;
  for (int a = 0; a < 6; ++a) {
    s.mean_pl[a] = s.ok_count == 0 ? kNaN : pl_sum[a] / static_cast<double>(s.ok_count);
  }
  if (scored.empty()) {
    throw Error(ErrorCode::NoOverlap,
                "no available frame associates with the ground truth within " +
                    format_double(max_dt) + " s");
  }
  s.evaluated_frames = scored.size();

  const Eigen::Index n = static_cast<Eigen::Index>(scored.size());
  Eigen::Matrix3Xd src(3, n);
  Eigen::Matrix3Xd dst(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    src.col(i) = est_centres[static_cast<std::size_t>(i)];
    dst.col(i) = true_centres[static_cast<std::size_t>(i)];
  }
  if (align && n >= 3) {
    const Eigen::Matrix4d T = Eigen::umeyama(src, dst, false);
    src = (T.topLeftCorner<3, 3>() * src).colwise() + T.topRightCorner<3, 1>();
  }
  s.ate_rmse = std::sqrt((src - dst).colwise().squaredNorm().mean());

  for (int a = 0; a < 6; ++a) {
    std::vector<double> pl;
    std::vector<double> sigma3;
    std::vector<double> err;
    for (const FrameRecord* rec : scored) {
      pl.push_back(rec->pl[a]);
      sigma3.push_back(rec->three_sigma[a]);
      err.push_back(rec->error[a]);
    }
    s.bound_rate_pl[a] = bound_rate(pl, err);
    s.bound_rate_three_sigma[a] = bound_rate(sigma3, err);
  }
  return s;
}

const std::vector<std::string>& frame_csv_columns() {
  static const std::vector<std::string> columns = {
      "frame",     "timestamp", "status",    "reason",    "tx",        "ty",
      "tz",        "qw",        "qx",        "qy",        "qz",        "matches",
      "rows",      "dof",       "wsse",      "td",        "excluded",  "err_x",
      "err_y",     "err_z",     "err_roll",  "err_pitch", "err_yaw",   "pl_x",
      "pl_y",      "pl_z",      "pl_roll",   "pl_pitch",  "pl_yaw",    "sigma3_x",
      "sigma3_y",  "sigma3_z",  "sigma3_roll", "sigma3_pitch", "sigma3_yaw", "icn"};
  return columns;
}

std::string format_frames_csv(const std::vector<FrameRecord>& records) {
  std::string out;
  const auto& cols = frame_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out += cols[i];
    out += i + 1 < cols.size() ? ',' : '\n';
  }
  for (const auto& r : records) {
    std::vector<std::string> f;
    f.push_back(std::to_string(r.index));
    f.push_back(format_double(r.timestamp));
    f.push_back(to_string(r.status));
    f.push_back(r.reason);
    f.push_back(format_double(r.pose.translation.x()));
    f.push_back(format_double(r.pose.translation.y()));
    f.push_back(format_double(r.pose.translation.z()));
    f.push_back(format_double(r.pose.rotation.w()));
    f.push_back(format_double(r.pose.rotation.x()));
    f.push_back(format_double(r.pose.rotation.y()));
    f.push_back(format_double(r.pose.rotation.z()));
    f.push_back(std::to_string(r.matches));
    f.push_back(std::to_string(r.rows));
    f.push_back(std::to_string(r.dof));
    f.push_back(format_double(r.wsse));
    f.push_back(format_double(r.td));
    std::string ex;
    for (std::size_t i = 0; i < r.excluded.size(); ++i) {
      if (i) ex += ';';
      ex += std::to_string(r.excluded[i]);
    }
    f.push_back(ex);
    for (double v : r.error) f.push_back(format_double(v));
    for (double v : r.pl) f.push_back(format_double(v));
    for (double v : r.three_sigma) f.push_back(format_double(v));
    f.push_back(format_double(r.icn));
    for (std::size_t i = 0; i < f.size(); ++i) {
      out += f[i];
      out += i + 1 < f.size() ? ',' : '\n';
    }
  }
  return out;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError,
                "frames.csv line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

int to_int(const std::string& s, int line) {
  const double v = to_double(s, line);
  if (v != std::floor(v)) {
    throw Error(ErrorCode::ParseError,
                "frames.csv line " + std::to_string(line) + ": expected integer");
  }
  return static_cast<int>(v);
}

}  // namespace

std::vector<FrameRecord> parse_frames_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::ParseError, "frames.csv: missing header");
  }
  if (split(line, ',') != frame_csv_columns()) {
    throw Error(ErrorCode::ParseError, "frames.csv: unexpected header columns");
  }
  std::vector<FrameRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line, ',');
    if (f.size() != frame_csv_columns().size()) {
      throw Error(ErrorCode::ParseError, "frames.csv line " + std::to_string(line_no) +
                                             ": wrong number of columns");
    }
    FrameRecord r;
    std::size_t c = 0;
    r.index = static_cast<std::size_t>(to_int(f[c++], line_no));
    r.timestamp = to_double(f[c++], line_no);
    const std::string& status = f[c++];
    if (status == "ok") {
      r.status = FrameStatus::Ok;
    } else if (status == "unavailable") {
      r.status = FrameStatus::Unavailable;
    } else if (status == "no_match") {
      r.status = FrameStatus::NoMatch;
    } else {
      throw Error(ErrorCode::ParseError, "frames.csv line " + std::to_string(line_no) +
                                             ": unknown status '" + status + "'");
    }
    r.reason = f[c++];
    r.pose.translation.x() = to_double(f[c++], line_no);
    r.pose.translation.y() = to_double(f[c++], line_no);
    r.pose.translation.z() = to_double(f[c++], line_no);
    const double qw = to_double(f[c++], line_no);
    const double qx = to_double(f[c++], line_no);
    const double qy = to_double(f[c++], line_no);
    const double qz = to_double(f[c++], line_no);
    r.pose.rotation = Eigen::Quaterniond(qw, qx, qy, qz);
    r.matches = to_int(f[c++], line_no);
    r.rows = to_int(f[c++], line_no);
    r.dof = to_int(f[c++], line_no);
    r.wsse = to_double(f[c++], line_no);
    r.td = to_double(f[c++], line_no);
    const std::string& ex = f[c++];
    if (!ex.empty()) {
      for (const auto& id : split(ex, ';')) r.excluded.push_back(to_int(id, line_no));
    }
    for (auto& v : r.error) v = to_double(f[c++], line_no);
    for (auto& v : r.pl) v = to_double(f[c++], line_no);
    for (auto& v : r.three_sigma) v = to_double(f[c++], line_no);
    r.icn = to_double(f[c++], line_no);
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_summary_json(const Summary& s) {
  nlohmann::ordered_json doc;
  doc["frame_count"] = s.frame_count;
  doc["ok_count"] = s.ok_count;
  doc["availability"] = s.availability;
  doc["ate_rmse"] = s.ate_rmse;
  doc["evaluated_frames"] = s.evaluated_frames;
  doc["aligned"] = s.aligned;
  auto per_axis = [](const std::array<double, 6>& v) {
    nlohmann::ordered_json o;
    for (Axis axis : kAllAxes) {
      const double x = v[static_cast<int>(axis)];
      o[axis_name(axis)] = std::isfinite(x) ? nlohmann::ordered_json(x) : nullptr;
    }
    return o;
  };
  doc["bound_rate_pl"] = per_axis(s.bound_rate_pl);
  doc["bound_rate_three_sigma"] = per_axis(s.bound_rate_three_sigma);
  doc["mean_pl"] = per_axis(s.mean_pl);
  nlohmann::ordered_json deg;
  for (Axis axis : {Axis::Roll, Axis::Pitch, Axis::Yaw}) {
    const double x = s.mean_pl[static_cast<int>(axis)] * 180.0 / std::numbers::pi;
    deg[axis_name(axis)] = std::isfinite(x) ? nlohmann::ordered_json(x) : nullptr;
  }
  doc["mean_pl_deg"] = deg;
  return doc.dump(2) + "\n";
}

std::string format_plot_csv(const std::vector<FrameRecord>& records, Axis axis) {
  const int a = static_cast<int>(axis);
  std::string out = "timestamp,error,pl,three_sigma,icn\n";
  for (const auto& r : records) {
    out += format_double(r.timestamp) + ',' + format_double(r.error[a]) + ',' +
           format_double(r.pl[a]) + ',' + format_double(r.three_sigma[a]) + ',' +
           format_double(r.icn) + '\n';
  }
  return out;
}

void emit_reports(const std::vector<FrameRecord>& records, const Summary* summary,
                  const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw Error(ErrorCode::IoError,
                "cannot create directory '" + out_dir.string() + "': " + ec.message());
  }
  write_text(out_dir / "frames.csv", format_frames_csv(records));
  if (summary) write_text(out_dir / "summary.json", format_summary_json(*summary));
  for (Axis axis : kAllAxes) {
    write_text(out_dir / (std::string("plot_") + axis_name(axis) + ".csv"),
               format_plot_csv(records, axis));
  }
}

}  // namespace linteg
