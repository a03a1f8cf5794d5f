#include "linteg/linteg.h"

#include "config.hpp"
#include "dataset_io.hpp"
#include "error.hpp"
#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <new>
#include <optional>
#include <string>

struct linteg_dataset {
  linteg::Dataset data;
};

struct linteg_report {
  std::vector<linteg::FrameRecord> records;
  std::optional<linteg::Summary> summary;
};

namespace {

thread_local std::string g_last_error;

linteg_status fail(linteg_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs body, translating exceptions into a status and the thread's last error.
template <typename F>
linteg_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return LINTEG_OK;
  } catch (const linteg::Error& e) {
    return fail(static_cast<linteg_status>(static_cast<int>(e.code()) + 1), e.what());
  } catch (const std::bad_alloc&) {
    return fail(LINTEG_INTERNAL_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return fail(LINTEG_INTERNAL_ERROR, e.what());
  } catch (...) {
    return fail(LINTEG_INTERNAL_ERROR, "unknown exception");
  }
}

linteg_status null_argument(const char* name) {
  return fail(LINTEG_INVALID_ARGUMENT, std::string(name) + " must not be NULL");
}

void copy_summary(const linteg::Summary& s, linteg_summary* out) {
  out->frame_count = s.frame_count;
  out->ok_count = s.ok_count;
  out->evaluated_frames = s.evaluated_frames;
  out->availability = s.availability;
  out->ate_rmse = s.ate_rmse;
  out->aligned = s.aligned ? 1 : 0;
  for (int a = 0; a < 6; ++a) {
    out->bound_rate_pl[a] = s.bound_rate_pl[a];
    out->bound_rate_three_sigma[a] = s.bound_rate_three_sigma[a];
    out->mean_pl[a] = s.mean_pl[a];
  }
}

}  // namespace

extern "C" {

const char* linteg_version(void) { return "0.1.0"; }

const char* linteg_status_string(linteg_status status) {
  switch (status) {
    case LINTEG_OK: return "ok";
    case LINTEG_INVALID_ARGUMENT: return "invalid argument";
    case LINTEG_BEHIND_CAMERA: return "point behind camera";
    case LINTEG_DEGENERATE_SEGMENT: return "degenerate segment";
    case LINTEG_INSUFFICIENT_OBSERVATIONS: return "insufficient observations";
    case LINTEG_SINGULAR_NORMAL_EQUATIONS: return "singular normal equations";
    case LINTEG_INTEGRITY_UNAVAILABLE: return "integrity unavailable";
    case LINTEG_NO_VISIBLE_LINES: return "no visible lines";
    case LINTEG_PARSE_ERROR: return "parse error";
    case LINTEG_INVARIANT_VIOLATION: return "invariant violation";
    case LINTEG_IO_ERROR: return "i/o error";
    case LINTEG_NO_OVERLAP: return "no overlap with ground truth";
    case LINTEG_DOMAIN_ERROR: return "domain error";
    case LINTEG_INTERNAL_ERROR: return "internal error";
  }
  return "unknown status";
}

const char* linteg_last_error(void) { return g_last_error.c_str(); }

linteg_status linteg_simulate(const char* config_json, linteg_dataset** out) {
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    const auto cfg = linteg::parse_simulation_config(config_json ? config_json : "");
    auto ds = std::make_unique<linteg_dataset>();
    ds->data = linteg::simulate_dataset(cfg);
    *out = ds.release();
  });
}

linteg_status linteg_dataset_load(const char* map_path, const char* frames_path,
                                  const char* trajectory_path, const char* camera_path,
                                  linteg_dataset** out) {
  if (!out) return null_argument("out");
  *out = nullptr;
  if (!map_path) return null_argument("map_path");
  if (!frames_path) return null_argument("frames_path");
  return guarded([&] {
    auto ds = std::make_unique<linteg_dataset>();
    ds->data.map = linteg::load_map(map_path);
    ds->data.frames = linteg::load_frames(frames_path);
    if (trajectory_path) ds->data.ground_truth = linteg::load_trajectory(trajectory_path);
    if (camera_path) ds->data.camera = linteg::load_camera(camera_path);
    *out = ds.release();
  });
}

linteg_status linteg_dataset_load_dir(const char* dir, linteg_dataset** out) {
  if (!out) return null_argument("out");
  *out = nullptr;
  if (!dir) return null_argument("dir");
  return guarded([&] {
    auto ds = std::make_unique<linteg_dataset>();
    ds->data = linteg::load_dataset_dir(dir);
    *out = ds.release();
  });
}

linteg_status linteg_dataset_export(const linteg_dataset* ds, const char* dir) {
  if (!ds) return null_argument("ds");
  if (!dir) return null_argument("dir");
  return guarded([&] { linteg::export_dataset(ds->data, dir); });
}

size_t linteg_dataset_frame_count(const linteg_dataset* ds) {
  return ds ? ds->data.frames.size() : 0;
}

size_t linteg_dataset_map_size(const linteg_dataset* ds) {
  return ds ? ds->data.map.size() : 0;
}

void linteg_dataset_free(linteg_dataset* ds) { delete ds; }

linteg_status linteg_run(const linteg_dataset* ds, const char* run_config_json,
                         linteg_report** out) {
  if (!out) return null_argument("out");
  *out = nullptr;
  if (!ds) return null_argument("ds");
  return guarded([&] {
    const auto cfg = linteg::parse_run_config(run_config_json ? run_config_json : "");
    auto report = std::make_unique<linteg_report>();
    report->records = linteg::run_pipeline(ds->data, cfg);
    if (!ds->data.ground_truth.empty()) {
      try {
        report->summary = linteg::evaluate(report->records, ds->data.ground_truth,
                                           cfg.align, cfg.max_time_diff);
      } catch (const linteg::Error& e) {
        if (e.code() != linteg::ErrorCode::NoOverlap) throw;
      }
    }
    *out = report.release();
  });
}

linteg_status linteg_report_load(const char* frames_csv_path, linteg_report** out) {
  if (!out) return null_argument("out");
  *out = nullptr;
  if (!frames_csv_path) return null_argument("frames_csv_path");
  return guarded([&] {
    auto report = std::make_unique<linteg_report>();
    report->records = linteg::parse_frames_csv(linteg::read_text(frames_csv_path));
    *out = report.release();
  });
}

size_t linteg_report_frame_count(const linteg_report* report) {
  return report ? report->records.size() : 0;
}

linteg_status linteg_report_frame(const linteg_report* report, size_t i, linteg_frame* out) {
  if (!report) return null_argument("report");
  if (!out) return null_argument("out");
  if (i >= report->records.size()) {
    return fail(LINTEG_INVALID_ARGUMENT, "frame index out of range");
  }
  const auto& r = report->records[i];
  out->index = r.index;
  out->timestamp = r.timestamp;
  out->status = static_cast<linteg_frame_status>(static_cast<int>(r.status));
  for (int k = 0; k < 3; ++k) out->t[k] = r.pose.translation[k];
  out->q[0] = r.pose.rotation.w();
  out->q[1] = r.pose.rotation.x();
  out->q[2] = r.pose.rotation.y();
  out->q[3] = r.pose.rotation.z();
  out->matches = r.matches;
  out->rows = r.rows;
  out->dof = r.dof;
  out->excluded_count = static_cast<int>(r.excluded.size());
  out->wsse = r.wsse;
  out->td = r.td;
  for (int a = 0; a < 6; ++a) {
    out->error[a] = r.error[a];
    out->pl[a] = r.pl[a];
    out->three_sigma[a] = r.three_sigma[a];
  }
  out->icn = r.icn;
  return LINTEG_OK;
}

linteg_status linteg_report_excluded(const linteg_report* report, size_t i, int* ids,
                                     size_t capacity) {
  if (!report) return null_argument("report");
  if (i >= report->records.size()) {
    return fail(LINTEG_INVALID_ARGUMENT, "frame index out of range");
  }
  const auto& ex = report->records[i].excluded;
  if (capacity > 0 && !ids) return null_argument("ids");
  std::copy_n(ex.begin(), std::min(capacity, ex.size()), ids);
  return LINTEG_OK;
}

linteg_status linteg_report_evaluate(linteg_report* report, const char* trajectory_path,
                                     int align, double max_time_diff, linteg_summary* out) {
  if (!report) return null_argument("report");
  if (!trajectory_path) return null_argument("trajectory_path");
  if (!(max_time_diff >= 0.0)) {
    return fail(LINTEG_INVALID_ARGUMENT, "max_time_diff must be >= 0");
  }
  return guarded([&] {
    const auto truth = linteg::load_trajectory(trajectory_path);
    report->summary =
        linteg::evaluate(report->records, truth, align != 0, max_time_diff);
    if (out) copy_summary(*report->summary, out);
  });
}

linteg_status linteg_report_summary(const linteg_report* report, linteg_summary* out) {
  if (!report) return null_argument("report");
  if (!out) return null_argument("out");
  if (!report->summary) {
    return fail(LINTEG_NO_OVERLAP, "report has not been evaluated against ground truth");
  }
  copy_summary(*report->summary, out);
  return LINTEG_OK;
}

linteg_status linteg_report_write(const linteg_report* report, const char* dir) {
  if (!report) return null_argument("report");
  if (!dir) return null_argument("dir");
  return guarded([&] {
    linteg::emit_reports(report->records, report->summary ? &*report->summary : nullptr, dir);
  });
}

void linteg_report_free(linteg_report* report) { delete report; }

linteg_status linteg_chi2_quantile(double p, int dof, double* out) {
  if (!out) return null_argument("out");
  return guarded([&] { *out = linteg::chi2_quantile(p, dof); });
}

}  // extern "C"
