#include "dataset_io.hpp"

#include "error.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace linteg {

using nlohmann::json;

namespace {

[[noreturn]] void invariant(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::InvariantViolation, where + ": " + what);
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError,
                what + ": invalid JSON at byte " + std::to_string(e.byte) +
                    ": " + e.what());
  }
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorCode::ParseError,
                where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) {
    throw Error(ErrorCode::ParseError, where + ": expected a number");
  }
  const double d = v.get<double>();
  if (!std::isfinite(d)) invariant(where, "must be finite");
  return d;
}

template <int N>
Eigen::Matrix<double, N, 1> vector_of(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != N) {
    throw Error(ErrorCode::ParseError,
                where + ": expected an array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) {
    out(i) = number(v[static_cast<std::size_t>(i)], where + "[" + std::to_string(i) + "]");
  }
  return out;
}

int integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) {
    throw Error(ErrorCode::ParseError, where + ": expected an integer");
  }
  return v.get<int>();
}

Eigen::Quaterniond unit_quaternion(const Eigen::Vector4d& wxyz,
                                   const std::string& where) {
  const double norm = wxyz.norm();
  if (std::abs(norm - 1.0) > 1e-6) {
    invariant(where, "quaternion norm " + format_double(norm) + " is not 1");
  }
  Eigen::Quaterniond q(wxyz(0), wxyz(1), wxyz(2), wxyz(3));
  q.normalize();
  return q;
}

json array_of(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

FrameData to_frame_data(const SimFrame& frame) {
  FrameData out;
  out.timestamp = frame.timestamp;
  out.initial_guess = frame.initial_guess;
  out.detections = frame.detections;
  for (std::size_t i = 0; i < frame.detections.size(); ++i) {
    out.detection_ids.push_back(static_cast<int>(i));
    out.map_ids.emplace_back(frame.ground_truth_matches[i]);
  }
  out.injected_outlier_ids = frame.injected_outlier_ids;
  return out;
}

std::vector<LineSegment3D> parse_map(const std::string& text) {
  const json doc = parse_json(text, "map");
  const json& lines = field(doc, "lines", "map");
  if (!lines.is_array()) {
    throw Error(ErrorCode::ParseError, "map.lines: expected an array");
  }
  if (lines.empty()) invariant("map.lines", "map has zero lines");
  std::vector<LineSegment3D> map;
  std::set<int> ids;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = "map.lines[" + std::to_string(i) + "]";
    LineSegment3D seg;
    seg.id = integer(field(lines[i], "id", where), where + ".id");
    seg.p_start = vector_of<3>(field(lines[i], "start", where), where + ".start");
    seg.p_end = vector_of<3>(field(lines[i], "end", where), where + ".end");
    if (!(seg.length() > 0.0)) invariant(where, "segment length must be > 0");
    if (!ids.insert(seg.id).second) {
      invariant(where + ".id", "duplicate id " + std::to_string(seg.id));
    }
    map.push_back(seg);
  }
  return map;
}

std::vector<FrameData> parse_frames(const std::string& text) {
  const json doc = parse_json(text, "frames");
  const json& frames = doc.is_array() ? doc : field(doc, "frames", "frames");
  if (!frames.is_array()) {
    throw Error(ErrorCode::ParseError, "frames: expected an array");
  }
  std::vector<FrameData> out;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const std::string where = "frames[" + std::to_string(f) + "]";
    const json& fr = frames[f];
    FrameData frame;
    frame.timestamp = number(field(fr, "timestamp", where), where + ".timestamp");
    const json& guess = field(fr, "initial_guess", where);
    frame.initial_guess.translation =
        vector_of<3>(field(guess, "t", where + ".initial_guess"), where + ".initial_guess.t");
    frame.initial_guess.rotation = unit_quaternion(
        vector_of<4>(field(guess, "q", where + ".initial_guess"), where + ".initial_guess.q"),
        where + ".initial_guess.q");
    const json& lines = field(fr, "lines", where);
    if (!lines.is_array()) {
      throw Error(ErrorCode::ParseError, where + ".lines: expected an array");
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::string lw = where + ".lines[" + std::to_string(i) + "]";
      const int id = integer(field(lines[i], "id", lw), lw + ".id");
      const Vec2 p1 = vector_of<2>(field(lines[i], "p1", lw), lw + ".p1");
      const Vec2 p2 = vector_of<2>(field(lines[i], "p2", lw), lw + ".p2");
      try {
        frame.detections.push_back(line_from_endpoints(p1, p2));
      } catch (const Error&) {
        invariant(lw, "endpoints p1 and p2 coincide");
      }
      frame.detection_ids.push_back(id);
      if (lines[i].contains("map_id")) {
        frame.map_ids.emplace_back(integer(lines[i]["map_id"], lw + ".map_id"));
      } else {
        frame.map_ids.emplace_back(std::nullopt);
      }
    }
    if (fr.contains("injected_outlier_ids")) {
      const json& ids = fr["injected_outlier_ids"];
      if (!ids.is_array()) {
        throw Error(ErrorCode::ParseError,
                    where + ".injected_outlier_ids: expected an array");
      }
      for (std::size_t i = 0; i < ids.size(); ++i) {
        frame.injected_outlier_ids.push_back(
            integer(ids[i], where + ".injected_outlier_ids[" + std::to_string(i) + "]"));
      }
    }
    out.push_back(std::move(frame));
  }
  return out;
}

std::vector<StampedPose> parse_trajectory(const std::string& text) {
  std::vector<StampedPose> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::vector<double> values;
    std::string token;
    while (fields >> token) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, "trajectory line " +
                                               std::to_string(line_no) +
                                               ": bad number '" + token + "'");
      }
    }
    if (values.size() != 8) {
      throw Error(ErrorCode::ParseError,
                  "trajectory line " + std::to_string(line_no) + ": expected 8 fields "
                  "(timestamp tx ty tz qx qy qz qw), got " +
                      std::to_string(values.size()));
    }
    Pose pose_cw;
    pose_cw.translation = Vec3(values[1], values[2], values[3]);
    pose_cw.rotation = unit_quaternion(
        Eigen::Vector4d(values[7], values[4], values[5], values[6]),
        "trajectory line " + std::to_string(line_no));
    out.push_back({values[0], pose_cw.inverse()});
  }
  return out;
}

CameraIntrinsics parse_camera(const std::string& text) {
  const json doc = parse_json(text, "camera");
  CameraIntrinsics k;
  k.fx = number(field(doc, "fx", "camera"), "camera.fx");
  k.fy = number(field(doc, "fy", "camera"), "camera.fy");
  k.cx = number(field(doc, "cx", "camera"), "camera.cx");
  k.cy = number(field(doc, "cy", "camera"), "camera.cy");
  k.width = integer(field(doc, "width", "camera"), "camera.width");
  k.height = integer(field(doc, "height", "camera"), "camera.height");
  k.validate();
  return k;
}

std::string format_map(const std::vector<LineSegment3D>& map) {
  json lines = json::array();
  for (const auto& seg : map) {
    lines.push_back({{"id", seg.id},
                     {"start", array_of(seg.p_start)},
                     {"end", array_of(seg.p_end)}});
  }
  return json{{"lines", lines}}.dump(1) + "\n";
}

std::string format_frames(const std::vector<FrameData>& frames) {
  json arr = json::array();
  for (const auto& f : frames) {
    const auto& q = f.initial_guess.rotation;
    json lines = json::array();
    for (std::size_t i = 0; i < f.detections.size(); ++i) {
      json l = {{"id", f.detection_ids[i]},
                {"p1", array_of(f.detections[i].p_start)},
                {"p2", array_of(f.detections[i].p_end)}};
      if (i < f.map_ids.size() && f.map_ids[i]) l["map_id"] = *f.map_ids[i];
      lines.push_back(std::move(l));
    }
    json fr = {{"timestamp", f.timestamp},
               {"initial_guess",
                {{"t", array_of(f.initial_guess.translation)},
                 {"q", json::array({q.w(), q.x(), q.y(), q.z()})}}},
               {"lines", lines}};
    if (!f.injected_outlier_ids.empty()) {
      fr["injected_outlier_ids"] = f.injected_outlier_ids;
    }
    arr.push_back(std::move(fr));
  }
  return json{{"frames", arr}}.dump(1) + "\n";
}

std::string format_trajectory(const std::vector<StampedPose>& poses) {
  std::string out = "# timestamp tx ty tz qx qy qz qw\n";
  for (const auto& sp : poses) {
    const Pose cw = sp.pose_wc.inverse();
    const auto& q = cw.rotation;
    for (double v : {sp.timestamp, cw.translation.x(), cw.translation.y(),
                     cw.translation.z(), q.x(), q.y(), q.z()}) {
      out += format_double(v);
      out += ' ';
    }
    out += format_double(q.w());
    out += '\n';
  }
  return out;
}

std::string format_camera(const CameraIntrinsics& k) {
  return json{{"fx", k.fx},       {"fy", k.fy},         {"cx", k.cx},
              {"cy", k.cy},       {"width", k.width},   {"height", k.height}}
             .dump(1) +
         "\n";
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for reading");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  }
  out << text;
  if (!out) {
    throw Error(ErrorCode::IoError, "failed writing '" + path.string() + "'");
  }
}

namespace {

template <typename F>
auto with_path(const std::filesystem::path& path, F&& parse) {
  const std::string text = read_text(path);
  try {
    return parse(text);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace

std::vector<LineSegment3D> load_map(const std::filesystem::path& path) {
  return with_path(path, parse_map);
}

std::vector<FrameData> load_frames(const std::filesystem::path& path) {
  return with_path(path, parse_frames);
}

std::vector<StampedPose> load_trajectory(const std::filesystem::path& path) {
  return with_path(path, parse_trajectory);
}

CameraIntrinsics load_camera(const std::filesystem::path& path) {
  return with_path(path, parse_camera);
}

void export_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw Error(ErrorCode::IoError,
                "cannot create directory '" + dir.string() + "': " + ec.message());
  }
  write_text(dir / kMapFile, format_map(dataset.map));
  write_text(dir / kFramesFile, format_frames(dataset.frames));
  write_text(dir / kTrajectoryFile, format_trajectory(dataset.ground_truth));
  if (dataset.camera) write_text(dir / kCameraFile, format_camera(*dataset.camera));
}

Dataset load_dataset_dir(const std::filesystem::path& dir) {
  Dataset d;
  d.map = load_map(dir / kMapFile);
  d.frames = load_frames(dir / kFramesFile);
  if (std::filesystem::exists(dir / kTrajectoryFile)) {
    d.ground_truth = load_trajectory(dir / kTrajectoryFile);
  }
  if (std::filesystem::exists(dir / kCameraFile)) {
    d.camera = load_camera(dir / kCameraFile);
  }
  return d;
}

}  // namespace linteg
