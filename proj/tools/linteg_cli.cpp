// Command-line front end over the linteg C API.
#include "linteg/linteg.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliError {
  int code;
  std::string message;
};

void check(linteg_status status, const std::string& what) {
  if (status == LINTEG_OK) return;
  std::string msg = what + ": " + linteg_status_string(status);
  const std::string detail = linteg_last_error();
  if (!detail.empty()) msg += " (" + detail + ")";
  throw CliError{static_cast<int>(status), msg};
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw CliError{LINTEG_IO_ERROR, "cannot read config '" + path + "'"};
  try {
    json doc = json::parse(in);
    if (!doc.is_object()) throw CliError{LINTEG_PARSE_ERROR, "config must be a JSON object"};
    return doc;
  } catch (const json::parse_error& e) {
    throw CliError{LINTEG_PARSE_ERROR, "config '" + path + "': " + e.what()};
  }
}

// Applies "a.b.c=value" overrides; values are parsed as JSON when possible.
void apply_sets(json& doc, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw CliError{LINTEG_INVALID_ARGUMENT, "--set expects key.path=value, got '" + s + "'"};
    }
    const std::string key = s.substr(0, eq);
    const std::string raw = s.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    std::string pointer = "/";
    for (char c : key) pointer += c == '.' ? '/' : c;
    doc[json::json_pointer(pointer)] = value;
  }
}

template <typename T>
void override(json& doc, const std::string& pointer, const std::optional<T>& v) {
  if (v) doc[json::json_pointer(pointer)] = *v;
}

struct DatasetHandle {
  linteg_dataset* ptr = nullptr;
  ~DatasetHandle() { linteg_dataset_free(ptr); }
};

struct ReportHandle {
  linteg_report* ptr = nullptr;
  ~ReportHandle() { linteg_report_free(ptr); }
};

struct DatasetArgs {
  std::string dir;
  std::string map;
  std::string frames;
  std::string trajectory;
  std::string camera;
};

void add_dataset_options(CLI::App* cmd, DatasetArgs& a) {
  cmd->add_option("--dataset", a.dir, "Dataset directory (map.json, frames.json, ...)");
  cmd->add_option("--map", a.map, "Map JSON file");
  cmd->add_option("--frames", a.frames, "Frames JSON file");
  cmd->add_option("--trajectory", a.trajectory, "Ground-truth TUM trajectory");
  cmd->add_option("--camera", a.camera, "Camera intrinsics JSON file");
}

void load_dataset(const DatasetArgs& a, DatasetHandle& ds) {
  std::string map = a.map;
  std::string frames = a.frames;
  std::string trajectory = a.trajectory;
  std::string camera = a.camera;
  if (!a.dir.empty()) {
    const fs::path dir(a.dir);
    if (map.empty()) map = (dir / "map.json").string();
    if (frames.empty()) frames = (dir / "frames.json").string();
    if (trajectory.empty() && fs::exists(dir / "groundtruth.tum")) {
      trajectory = (dir / "groundtruth.tum").string();
    }
    if (camera.empty() && fs::exists(dir / "camera.json")) {
      camera = (dir / "camera.json").string();
    }
  }
  if (map.empty() || frames.empty()) {
    throw CliError{LINTEG_INVALID_ARGUMENT, "need --dataset or both --map and --frames"};
  }
  check(linteg_dataset_load(map.c_str(), frames.c_str(),
                            trajectory.empty() ? nullptr : trajectory.c_str(),
                            camera.empty() ? nullptr : camera.c_str(), &ds.ptr),
        "loading dataset");
}

struct RunArgs {
  std::optional<double> sigma_px;
  std::optional<double> sigma2_px;
  std::optional<double> alpha;
  std::optional<double> k_sigma;
  std::optional<int> r_max;
  std::optional<int> min_lines;
  std::optional<int> threads;
  std::optional<std::string> association;
  std::optional<double> max_time_diff;
  bool align = false;
};

void add_run_options(CLI::App* cmd, RunArgs& r) {
  cmd->add_option("--sigma-px", r.sigma_px, "Assumed pixel noise standard deviation");
  cmd->add_option("--sigma2", r.sigma2_px, "Assumed pixel noise variance");
  cmd->add_option("--alpha", r.alpha, "False-alarm probability of the chi-square test");
  cmd->add_option("--k-sigma", r.k_sigma, "Noise-term multiplier");
  cmd->add_option("--r-max", r.r_max, "Largest fault subset size in the bias term");
  cmd->add_option("--min-lines", r.min_lines, "Minimum surviving lines for exclusion");
  cmd->add_option("--threads", r.threads, "Worker threads (0 = hardware)");
  cmd->add_option("--association", r.association, "match or labels")
      ->check(CLI::IsMember({"match", "labels"}));
  cmd->add_option("--max-time-diff", r.max_time_diff, "Ground-truth association window (s)");
  cmd->add_flag("--align", r.align, "Rigidly align estimates before ATE");
}

void apply_run_args(json& doc, const RunArgs& r) {
  if (r.sigma2_px) {
    doc.erase("sigma_px");
    doc["sigma2_px"] = *r.sigma2_px;
  }
  if (r.sigma_px) {
    doc.erase("sigma2_px");
    doc["sigma_px"] = *r.sigma_px;
  }
  override(doc, "/integrity/alpha", r.alpha);
  override(doc, "/integrity/k_sigma", r.k_sigma);
  override(doc, "/integrity/r_max", r.r_max);
  override(doc, "/integrity/min_lines", r.min_lines);
  override(doc, "/threads", r.threads);
  override(doc, "/association", r.association);
  override(doc, "/max_time_diff", r.max_time_diff);
  if (r.align) doc["align"] = true;
}

void print_summary(const linteg_summary& s) {
  static const char* axes[6] = {"x", "y", "z", "roll", "pitch", "yaw"};
  std::printf("frames %zu  ok %zu  availability %.4f  ate_rmse %.6f m\n", s.frame_count,
              s.ok_count, s.availability, s.ate_rmse);
  for (int a = 0; a < 6; ++a) {
    std::printf("  %-5s  pl_rate %.4f  3sigma_rate %.4f  mean_pl %.6g\n", axes[a],
                s.bound_rate_pl[a], s.bound_rate_three_sigma[a], s.mean_pl[a]);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Line-feature localization with integrity monitoring"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(linteg_version()));

  std::string config_path;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  std::string out_dir;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--set", sets, "Override any config key: key.path=value");
    cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  };

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  add_common(sim);
  sim->add_option("--out", out_dir, "Output dataset directory")->required();
  std::optional<double> sim_sigma;
  std::optional<int> sim_outliers;
  std::optional<double> sim_bias;
  std::optional<std::string> sim_mode;
  std::optional<int> sim_steps;
  std::optional<int> sim_lines;
  std::optional<std::string> sim_layout;
  std::optional<double> sim_radius;
  sim->add_option("--sigma-px", sim_sigma, "Pixel noise standard deviation");
  sim->add_option("--outliers", sim_outliers, "Outlier lines per frame");
  sim->add_option("--outlier-bias-px", sim_bias, "Outlier offset in pixels");
  sim->add_option("--outlier-mode", sim_mode, "offset or mismatch")
      ->check(CLI::IsMember({"offset", "mismatch"}));
  sim->add_option("--steps", sim_steps, "Trajectory length in frames");
  sim->add_option("--line-count", sim_lines, "Number of map lines");
  sim->add_option("--layout", sim_layout, "manhattan or parallel")
      ->check(CLI::IsMember({"manhattan", "parallel"}));
  sim->add_option("--radius", sim_radius, "Circle trajectory radius (m)");

  // run
  auto* run = app.add_subcommand("run", "Estimate poses and protection levels");
  add_common(run);
  DatasetArgs run_data;
  RunArgs run_args;
  add_dataset_options(run, run_data);
  add_run_options(run, run_args);
  run->add_option("--out", out_dir, "Report directory")->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score a frames.csv against ground truth");
  add_common(eval);
  std::string eval_frames;
  std::string eval_truth;
  bool eval_align = false;
  double eval_dt = 0.01;
  eval->add_option("--frames-csv", eval_frames, "frames.csv from a run")->required();
  eval->add_option("--trajectory", eval_truth, "Ground-truth TUM trajectory")->required();
  eval->add_option("--out", out_dir, "Directory for summary.json and plots");
  eval->add_flag("--align", eval_align, "Rigidly align estimates before ATE");
  eval->add_option("--max-time-diff", eval_dt, "Association window (s)")->capture_default_str();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Repeat a run over one parameter");
  add_common(sweep);
  DatasetArgs sweep_data;
  RunArgs sweep_args;
  std::string sweep_param;
  std::vector<double> sweep_values;
  add_dataset_options(sweep, sweep_data);
  add_run_options(sweep, sweep_args);
  sweep->add_option("--param", sweep_param, "sigma2 or r_max")
      ->required()
      ->check(CLI::IsMember({"sigma2", "r_max"}));
  sweep->add_option("--values", sweep_values, "Parameter values")->required()->delimiter(',');
  sweep->add_option("--out", out_dir, "Directory for sweep.csv and per-value reports")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    json doc = load_config(config_path);
    apply_sets(doc, sets);
    doc["seed"] = seed;

    if (*sim) {
      override(doc, "/noise/sigma_px", sim_sigma);
      override(doc, "/noise/outlier_count", sim_outliers);
      override(doc, "/noise/outlier_bias_px", sim_bias);
      override(doc, "/noise/outlier_mode", sim_mode);
      override(doc, "/trajectory/steps", sim_steps);
      override(doc, "/scene/line_count", sim_lines);
      override(doc, "/scene/layout", sim_layout);
      override(doc, "/trajectory/radius", sim_radius);
      DatasetHandle ds;
      check(linteg_simulate(doc.dump().c_str(), &ds.ptr), "simulate");
      check(linteg_dataset_export(ds.ptr, out_dir.c_str()), "writing dataset");
      std::printf("wrote %zu frames, %zu map lines to %s\n",
                  linteg_dataset_frame_count(ds.ptr), linteg_dataset_map_size(ds.ptr),
                  out_dir.c_str());
    } else if (*run) {
      apply_run_args(doc, run_args);
      DatasetHandle ds;
      load_dataset(run_data, ds);
      ReportHandle report;
      check(linteg_run(ds.ptr, doc.dump().c_str(), &report.ptr), "run");
      check(linteg_report_write(report.ptr, out_dir.c_str()), "writing report");
      linteg_summary s{};
      if (linteg_report_summary(report.ptr, &s) == LINTEG_OK) {
        print_summary(s);
      } else {
        std::printf("processed %zu frames (no ground truth)\n",
                    linteg_report_frame_count(report.ptr));
      }
    } else if (*eval) {
      ReportHandle report;
      check(linteg_report_load(eval_frames.c_str(), &report.ptr), "loading frames.csv");
      linteg_summary s{};
      check(linteg_report_evaluate(report.ptr, eval_truth.c_str(), eval_align ? 1 : 0,
                                   eval_dt, &s),
            "evaluate");
      print_summary(s);
      if (!out_dir.empty()) {
        check(linteg_report_write(report.ptr, out_dir.c_str()), "writing report");
      }
    } else if (*sweep) {
      DatasetHandle ds;
      load_dataset(sweep_data, ds);
      fs::create_directories(out_dir);
      std::ostringstream csv;
      csv << "param,value,frames,ok,availability";
      for (const char* a : {"x", "y", "z", "roll", "pitch", "yaw"}) csv << ",mean_pl_" << a;
      for (const char* a : {"x", "y", "z", "roll", "pitch", "yaw"}) csv << ",pl_rate_" << a;
      csv << '\n';
      for (double v : sweep_values) {
        json cfg = doc;
        apply_run_args(cfg, sweep_args);
        if (sweep_param == "sigma2") {
          cfg.erase("sigma_px");
          cfg["sigma2_px"] = v;
        } else {
          if (v != std::floor(v)) {
            throw CliError{LINTEG_INVALID_ARGUMENT, "r_max values must be integers"};
          }
          cfg["integrity"]["r_max"] = static_cast<int>(v);
        }
        ReportHandle report;
        check(linteg_run(ds.ptr, cfg.dump().c_str(), &report.ptr), "run");
        std::ostringstream name;
        name << sweep_param << '_' << v;
        check(linteg_report_write(report.ptr, (fs::path(out_dir) / name.str()).string().c_str()),
              "writing report");

        const std::size_t n = linteg_report_frame_count(report.ptr);
        double sum[6] = {};
        std::size_t ok = 0;
        for (std::size_t i = 0; i < n; ++i) {
          linteg_frame f{};
          check(linteg_report_frame(report.ptr, i, &f), "reading frame");
          if (f.status != LINTEG_FRAME_OK) continue;
          ++ok;
          for (int a = 0; a < 6; ++a) sum[a] += f.pl[a];
        }
        linteg_summary s{};
        const bool evaluated = linteg_report_summary(report.ptr, &s) == LINTEG_OK;
        char buf[64];
        csv << sweep_param << ',' << v << ',' << n << ',' << ok << ',';
        std::snprintf(buf, sizeof buf, "%.17g", n ? static_cast<double>(ok) / n : 0.0);
        csv << buf;
        for (int a = 0; a < 6; ++a) {
          std::snprintf(buf, sizeof buf, "%.17g", ok ? sum[a] / ok : NAN);
          csv << ',' << buf;
        }
        for (int a = 0; a < 6; ++a) {
          std::snprintf(buf, sizeof buf, "%.17g", evaluated ? s.bound_rate_pl[a] : NAN);
          csv << ',' << buf;
        }
        csv << '\n';
        std::printf("%s=%g  ok %zu/%zu\n", sweep_param.c_str(), v, ok, n);
      }
      std::ofstream out(fs::path(out_dir) / "sweep.csv");
      out << csv.str();
      if (!out) throw CliError{LINTEG_IO_ERROR, "cannot write sweep.csv"};
    }
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << '\n';
    return e.code == 0 ? 1 : e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
