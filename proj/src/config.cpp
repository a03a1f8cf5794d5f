#include "config.hpp"

#include "error.hpp"

#include "json.hpp"

#include <cmath>
#include <numbers>

namespace linteg {

using nlohmann::json;

namespace {

json parse_document(const std::string& text) {
  if (text.empty()) return json::object();
  try {
    json doc = json::parse(text);
    if (!doc.is_object()) {
      throw Error(ErrorCode::ParseError, "config: top level must be an object");
    }
    return doc;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError,
                "config: invalid JSON at byte " + std::to_string(e.byte));
  }
}

// Reads obj[key] into out when present, reporting type errors with the path.
template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ParseError,
                "config: " + where + "." + key + " has the wrong type");
  }
}

Vec3 read_vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) {
    throw Error(ErrorCode::ParseError, "config: " + where + " must be [x, y, z]");
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

CameraIntrinsics read_camera(const json& c) {
  CameraIntrinsics k = default_camera();
  read(c, "fx", k.fx, "camera");
  read(c, "fy", k.fy, "camera");
  read(c, "cx", k.cx, "camera");
  read(c, "cy", k.cy, "camera");
  read(c, "width", k.width, "camera");
  read(c, "height", k.height, "camera");
  k.validate();
  return k;
}

Pose read_pose(const json& p, const std::string& where) {
  Pose pose;
  if (p.contains("t")) pose.translation = read_vec3(p["t"], where + ".t");
  if (p.contains("q")) {
    const json& q = p["q"];
    if (!q.is_array() || q.size() != 4) {
      throw Error(ErrorCode::ParseError, "config: " + where + ".q must be [w, x, y, z]");
    }
    Eigen::Quaterniond quat(q[0].get<double>(), q[1].get<double>(),
                            q[2].get<double>(), q[3].get<double>());
    if (std::abs(quat.norm() - 1.0) > 1e-6) {
      throw Error(ErrorCode::InvariantViolation,
                  "config: " + where + ".q is not a unit quaternion");
    }
    pose.rotation = quat.normalized();
  }
  return pose;
}

}  // namespace

SimulationConfig parse_simulation_config(const std::string& json_text) {
  const json doc = parse_document(json_text);
  SimulationConfig cfg;
  read(doc, "seed", cfg.seed, "");
  if (doc.contains("camera")) cfg.camera = read_camera(doc["camera"]);
  read(doc, "min_projected_length", cfg.min_projected_length, "");
  if (doc.contains("matching")) {
    read(doc["matching"], "min_projected_length", cfg.min_projected_length, "matching");
  }

  if (doc.contains("scene")) {
    const json& s = doc["scene"];
    read(s, "line_count", cfg.scene.line_count, "scene");
    read(s, "extent", cfg.scene.extent, "scene");
    read(s, "axis_aligned_fraction", cfg.scene.axis_aligned_fraction, "scene");
    if (s.contains("axis_aligned_fraction") && !s.contains("random_fraction")) {
      cfg.scene.random_fraction = 1.0 - cfg.scene.axis_aligned_fraction;
    }
    read(s, "random_fraction", cfg.scene.random_fraction, "scene");
    read(s, "min_length", cfg.scene.min_length, "scene");
    read(s, "max_length", cfg.scene.max_length, "scene");
    std::string layout = "manhattan";
    read(s, "layout", layout, "scene");
    if (layout == "manhattan") {
      cfg.scene.layout = SceneLayout::Manhattan;
    } else if (layout == "parallel") {
      cfg.scene.layout = SceneLayout::Parallel;
    } else {
      throw Error(ErrorCode::InvariantViolation,
                  "config: scene.layout must be 'manhattan' or 'parallel'");
    }
  }
  cfg.scene.seed = cfg.seed;

  if (doc.contains("trajectory")) {
    const json& t = doc["trajectory"];
    std::string kind = "circle";
    read(t, "kind", kind, "trajectory");
    if (kind == "circle") {
      cfg.trajectory.kind = TrajectoryKind::Circle;
    } else if (kind == "waypoints") {
      cfg.trajectory.kind = TrajectoryKind::Waypoints;
    } else {
      throw Error(ErrorCode::InvariantViolation,
                  "config: trajectory.kind must be 'circle' or 'waypoints'");
    }
    if (t.contains("center")) cfg.trajectory.center = read_vec3(t["center"], "trajectory.center");
    if (t.contains("look_at")) cfg.trajectory.look_at = read_vec3(t["look_at"], "trajectory.look_at");
    read(t, "radius", cfg.trajectory.radius, "trajectory");
    read(t, "steps", cfg.trajectory.steps, "trajectory");
    read(t, "rate_hz", cfg.trajectory.rate_hz, "trajectory");
    read(t, "start_time", cfg.trajectory.start_time, "trajectory");
    read(t, "max_angular_step", cfg.trajectory.max_angular_step, "trajectory");
    if (t.contains("waypoints")) {
      const json& w = t["waypoints"];
      if (!w.is_array()) {
        throw Error(ErrorCode::ParseError, "config: trajectory.waypoints must be an array");
      }
      cfg.trajectory.waypoints.clear();
      for (std::size_t i = 0; i < w.size(); ++i) {
        cfg.trajectory.waypoints.push_back(
            read_vec3(w[i], "trajectory.waypoints[" + std::to_string(i) + "]"));
      }
    }
  }

  if (doc.contains("noise")) {
    const json& n = doc["noise"];
    read(n, "sigma_px", cfg.noise.sigma_px, "noise");
    read(n, "outlier_count", cfg.noise.outlier_count, "noise");
    read(n, "outlier_bias_px", cfg.noise.outlier_bias_px, "noise");
    read(n, "guess_sigma_t", cfg.noise.guess_sigma_t, "noise");
    read(n, "guess_sigma_r", cfg.noise.guess_sigma_r, "noise");
    std::string mode = "offset";
    read(n, "outlier_mode", mode, "noise");
    if (mode == "offset") {
      cfg.noise.outlier_mode = OutlierMode::Offset;
    } else if (mode == "mismatch") {
      cfg.noise.outlier_mode = OutlierMode::Mismatch;
    } else {
      throw Error(ErrorCode::InvariantViolation,
                  "config: noise.outlier_mode must be 'offset' or 'mismatch'");
    }
  }

  cfg.camera.validate();
  cfg.scene.validate();
  cfg.trajectory.validate();
  cfg.noise.validate();
  return cfg;
}

RunConfig parse_run_config(const std::string& json_text) {
  const json doc = parse_document(json_text);
  RunConfig cfg;
  read(doc, "seed", cfg.seed, "");
  read(doc, "sigma_px", cfg.sigma_px, "");
  if (doc.contains("sigma2_px")) {
    double s2 = 0.0;
    read(doc, "sigma2_px", s2, "");
    if (!(s2 > 0.0)) {
      throw Error(ErrorCode::InvariantViolation, "config: sigma2_px must be > 0");
    }
    cfg.sigma_px = std::sqrt(s2);
  }
  if (!(cfg.sigma_px > 0.0)) {
    throw Error(ErrorCode::InvariantViolation, "config: sigma_px must be > 0");
  }
  read(doc, "threads", cfg.threads, "");
  read(doc, "align", cfg.align, "");
  read(doc, "max_time_diff", cfg.max_time_diff, "");
  if (doc.contains("camera")) cfg.camera = read_camera(doc["camera"]);
  if (doc.contains("extrinsic")) cfg.extrinsic_bc = read_pose(doc["extrinsic"], "extrinsic");

  std::string association = "match";
  read(doc, "association", association, "");
  if (association == "match") {
    cfg.association = Association::Match;
  } else if (association == "labels") {
    cfg.association = Association::Labels;
  } else {
    throw Error(ErrorCode::InvariantViolation,
                "config: association must be 'match' or 'labels'");
  }

  if (doc.contains("matching")) {
    const json& m = doc["matching"];
    read(m, "mean_distance_max", cfg.matching.mean_distance_max, "matching");
    if (m.contains("angle_max_deg")) {
      double deg = 0.0;
      read(m, "angle_max_deg", deg, "matching");
      cfg.matching.angle_max = deg * std::numbers::pi / 180.0;
    }
    read(m, "angle_max", cfg.matching.angle_max, "matching");
    read(m, "overlap_min", cfg.matching.overlap_min, "matching");
    read(m, "sample_count", cfg.matching.sample_count, "matching");
    read(m, "min_projected_length", cfg.matching.min_projected_length, "matching");
  }
  cfg.matching.validate();

  if (doc.contains("integrity")) {
    const json& i = doc["integrity"];
    read(i, "alpha", cfg.integrity.alpha, "integrity");
    read(i, "k_sigma", cfg.integrity.k_sigma, "integrity");
    read(i, "r_max", cfg.integrity.r_max, "integrity");
    read(i, "min_lines", cfg.integrity.min_lines, "integrity");
    std::string rule = "reduction";
    read(i, "exclusion", rule, "integrity");
    if (rule == "reduction") {
      cfg.integrity.exclusion = ExclusionRule::LargestReduction;
    } else if (rule == "residual") {
      cfg.integrity.exclusion = ExclusionRule::LargestResidual;
    } else {
      throw Error(ErrorCode::InvariantViolation,
                  "config: integrity.exclusion must be 'reduction' or 'residual'");
    }
  }
  cfg.integrity.validate();

  if (doc.contains("solver")) {
    const json& s = doc["solver"];
    read(s, "max_iterations", cfg.solver.max_iterations, "solver");
    read(s, "step_tolerance", cfg.solver.step_tolerance, "solver");
    read(s, "initial_lambda", cfg.solver.initial_lambda, "solver");
    read(s, "lambda_factor", cfg.solver.lambda_factor, "solver");
  }
  if (cfg.solver.max_iterations < 1 || !(cfg.solver.step_tolerance > 0.0)) {
    throw Error(ErrorCode::InvariantViolation,
                "config: solver needs max_iterations >= 1 and step_tolerance > 0");
  }
  return cfg;
}

std::string dump_run_config(const RunConfig& cfg) {
  json doc;
  doc["seed"] = cfg.seed;
  doc["sigma_px"] = cfg.sigma_px;
  doc["threads"] = cfg.threads;
  doc["align"] = cfg.align;
  doc["max_time_diff"] = cfg.max_time_diff;
  doc["association"] = cfg.association == Association::Match ? "match" : "labels";
  if (cfg.camera) {
    doc["camera"] = {{"fx", cfg.camera->fx},     {"fy", cfg.camera->fy},
                     {"cx", cfg.camera->cx},     {"cy", cfg.camera->cy},
                     {"width", cfg.camera->width}, {"height", cfg.camera->height}};
  }
  if (cfg.extrinsic_bc) {
    const auto& p = *cfg.extrinsic_bc;
    doc["extrinsic"] = {
        {"t", {p.translation.x(), p.translation.y(), p.translation.z()}},
        {"q", {p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()}}};
  }
  doc["matching"] = {{"mean_distance_max", cfg.matching.mean_distance_max},
                     {"angle_max", cfg.matching.angle_max},
                     {"overlap_min", cfg.matching.overlap_min},
                     {"sample_count", cfg.matching.sample_count},
                     {"min_projected_length", cfg.matching.min_projected_length}};
  doc["integrity"] = {{"alpha", cfg.integrity.alpha},
                      {"k_sigma", cfg.integrity.k_sigma},
                      {"r_max", cfg.integrity.r_max},
                      {"min_lines", cfg.integrity.min_lines},
                      {"exclusion", cfg.integrity.exclusion == ExclusionRule::LargestReduction
                                        ? "reduction"
                                        : "residual"}};
  doc["solver"] = {{"max_iterations", cfg.solver.max_iterations},
                   {"step_tolerance", cfg.solver.step_tolerance},
                   {"initial_lambda", cfg.solver.initial_lambda},
                   {"lambda_factor", cfg.solver.lambda_factor}};
  return doc.dump(2);
}

}  // namespace linteg
