/* C interface to the line-based localization and integrity library. */
#ifndef LINTEG_LINTEG_H
#define LINTEG_LINTEG_H

#include <stddef.h>
#include <stdint.h>

#if defined(LINTEG_BUILDING)
#define LINTEG_API __attribute__((visibility("default")))
#else
#define LINTEG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum linteg_status {
  LINTEG_OK = 0,
  LINTEG_INVALID_ARGUMENT = 1,
  LINTEG_BEHIND_CAMERA = 2,
  LINTEG_DEGENERATE_SEGMENT = 3,
  LINTEG_INSUFFICIENT_OBSERVATIONS = 4,
  LINTEG_SINGULAR_NORMAL_EQUATIONS = 5,
  LINTEG_INTEGRITY_UNAVAILABLE = 6,
  LINTEG_NO_VISIBLE_LINES = 7,
  LINTEG_PARSE_ERROR = 8,
  LINTEG_INVARIANT_VIOLATION = 9,
  LINTEG_IO_ERROR = 10,
  LINTEG_NO_OVERLAP = 11,
  LINTEG_DOMAIN_ERROR = 12,
  LINTEG_INTERNAL_ERROR = 99
} linteg_status;

typedef enum linteg_frame_status {
  LINTEG_FRAME_OK = 0,
  LINTEG_FRAME_UNAVAILABLE = 1,
  LINTEG_FRAME_NO_MATCH = 2
} linteg_frame_status;

typedef struct linteg_dataset linteg_dataset;
typedef struct linteg_report linteg_report;

/* Axis order everywhere: x, y, z, roll, pitch, yaw. Missing values are NaN. */
typedef struct linteg_frame {
  size_t index;
  double timestamp;
  linteg_frame_status status;
  double t[3];       /* world -> camera translation */
  double q[4];       /* world -> camera rotation, w x y z */
  int matches;
  int rows;
  int dof;
  int excluded_count;
  double wsse;
  double td;
  double error[6];
  double pl[6];
  double three_sigma[6];
  double icn;
} linteg_frame;

typedef struct linteg_summary {
  size_t frame_count;
  size_t ok_count;
  size_t evaluated_frames;
  double availability;
  double ate_rmse;
  int aligned;
  double bound_rate_pl[6];
  double bound_rate_three_sigma[6];
  double mean_pl[6];
} linteg_summary;

LINTEG_API const char* linteg_version(void);
LINTEG_API const char* linteg_status_string(linteg_status status);
/* Message of the last failing call on this thread; empty when none. */
LINTEG_API const char* linteg_last_error(void);

/* Simulation config is a JSON document; NULL or "" uses the defaults. */
LINTEG_API linteg_status linteg_simulate(const char* config_json, linteg_dataset** out);
/* trajectory_path and camera_path may be NULL. */
LINTEG_API linteg_status linteg_dataset_load(const char* map_path, const char* frames_path,
                                             const char* trajectory_path,
                                             const char* camera_path,
                                             linteg_dataset** out);
LINTEG_API linteg_status linteg_dataset_load_dir(const char* dir, linteg_dataset** out);
LINTEG_API linteg_status linteg_dataset_export(const linteg_dataset* ds, const char* dir);
LINTEG_API size_t linteg_dataset_frame_count(const linteg_dataset* ds);
LINTEG_API size_t linteg_dataset_map_size(const linteg_dataset* ds);
LINTEG_API void linteg_dataset_free(linteg_dataset* ds);

/* Runs every frame of the dataset. Per-frame failures are recorded in the
 * report; only configuration and dataset errors fail the call. */
LINTEG_API linteg_status linteg_run(const linteg_dataset* ds, const char* run_config_json,
                                    linteg_report** out);
/* Loads a previously written frames.csv as a report. */
LINTEG_API linteg_status linteg_report_load(const char* frames_csv_path, linteg_report** out);
LINTEG_API size_t linteg_report_frame_count(const linteg_report* report);
LINTEG_API linteg_status linteg_report_frame(const linteg_report* report, size_t i,
                                             linteg_frame* out);
/* Copies up to capacity excluded line ids of frame i into ids. */
LINTEG_API linteg_status linteg_report_excluded(const linteg_report* report, size_t i,
                                                int* ids, size_t capacity);
/* Recomputes errors against the trajectory and fills the summary. */
LINTEG_API linteg_status linteg_report_evaluate(linteg_report* report,
                                                const char* trajectory_path, int align,
                                                double max_time_diff, linteg_summary* out);
/* Summary of the last evaluation; LINTEG_NO_OVERLAP when there is none. A
 * run over a dataset with ground truth is evaluated automatically. */
LINTEG_API linteg_status linteg_report_summary(const linteg_report* report,
                                               linteg_summary* out);
/* frames.csv, plot_<axis>.csv and, when evaluated, summary.json. */
LINTEG_API linteg_status linteg_report_write(const linteg_report* report, const char* dir);
LINTEG_API void linteg_report_free(linteg_report* report);

LINTEG_API linteg_status linteg_chi2_quantile(double p, int dof, double* out);

#ifdef __cplusplus
}
#endif

#endif
