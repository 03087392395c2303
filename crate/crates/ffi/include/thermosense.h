#ifndef THERMOSENSE_H
#define THERMOSENSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum TsStatus {
  TS_STATUS_OK = 0,
  TS_STATUS_NULL_POINTER = 1,
  TS_STATUS_DOMAIN = 2,
  TS_STATUS_CONVERGENCE = 3,
  TS_STATUS_QUADRATURE = 4,
  TS_STATUS_EMPTY_TRACE = 5,
  TS_STATUS_NORMALIZATION = 6,
  TS_STATUS_DIMENSION = 7,
  TS_STATUS_RANGE = 8,
  TS_STATUS_PARSE = 9,
  TS_STATUS_VALIDATION = 10,
  TS_STATUS_EMPTY_DATABASE = 11,
  TS_STATUS_STRATIFICATION = 12,
  TS_STATUS_NO_CONVERGENCE = 13,
  TS_STATUS_IO = 14,
  TS_STATUS_FORMAT = 15,
  TS_STATUS_INVALID_UTF8 = 16,
  TS_STATUS_OUT_OF_BOUNDS = 17,
  TS_STATUS_PANIC = 99,
} TsStatus;

typedef enum TsFitStatus {
  TS_FIT_STATUS_CONVERGED = 0,
  TS_FIT_STATUS_BOUND_ACTIVE = 1,
  TS_FIT_STATUS_MAX_ITERATIONS = 2,
} TsFitStatus;

// Thresholded score matrix.
typedef struct TsBinaryMap TsBinaryMap;

// Pairwise F1 matrix over an effusivity grid.
typedef struct TsF1Matrix TsF1Matrix;

// Material database; names are cached as C strings owned by the handle.
typedef struct TsMaterialDb TsMaterialDb;

// Temperature trace.
typedef struct TsTrace TsTrace;

typedef struct TsSensorParams {
  double e_sens;
  double alpha_sens;
  double thermistor_depth;
  double sample_rate;
  double noise_sigma;
} TsSensorParams;

typedef struct TsContact {
  double t_sens0;
  double t_obj0;
  double t_contact;
} TsContact;

typedef struct TsPairPrediction {
  double f1;
  double lambda;
  double t_surf1;
  double t_surf2;
  uintptr_t n;
} TsPairPrediction;

typedef struct TsMaterialRange {
  double e_min;
  double e_max;
  // NaN when the record has no identified value.
  double e_identified;
} TsMaterialRange;

typedef struct TsFitResult {
  double e_obj;
  double t_offset;
  double sse;
  uintptr_t iterations;
  bool converged;
  enum TsFitStatus status;
} TsFitResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next call into this library on the same thread.
const char *ts_last_error(void);

// Library version as a static NUL-terminated string.
const char *ts_version(void);

struct TsSensorParams ts_sensor_default(void);

struct TsContact ts_contact_default(void);

enum TsStatus ts_erfc(double z, double *out);

enum TsStatus ts_reg_inc_beta(double x, double a, double b, double *out);

// Uses the default series tolerance.
enum TsStatus ts_noncentral_f_cdf(double f, double d1, double d2, double lambda, double *out);

enum TsStatus ts_predict_pair(const struct TsSensorParams *sensor,
                              double e1,
                              double e2,
                              const struct TsContact *contact,
                              double sigma,
                              struct TsPairPrediction *out);

// On success `*found` is 1 and `*delta` holds the difference, or `*found`
// is 0 when no effusivity in the physical range reaches `phi`.
enum TsStatus ts_min_distinguishable_difference(const struct TsSensorParams *sensor,
                                                double e,
                                                const struct TsContact *contact,
                                                double sigma,
                                                double phi,
                                                int32_t *found,
                                                double *delta);

enum TsStatus ts_f1_matrix_new(const struct TsSensorParams *sensor,
                               double e_min,
                               double e_max,
                               uintptr_t intervals,
                               const struct TsContact *contact,
                               double sigma,
                               struct TsF1Matrix **out);

enum TsStatus ts_f1_matrix_read_json(const char *path, struct TsF1Matrix **out);

enum TsStatus ts_f1_matrix_write_json(const struct TsF1Matrix *m, const char *path);

// Number of rows (and columns); 0 for NULL.
uintptr_t ts_f1_matrix_size(const struct TsF1Matrix *m);

enum TsStatus ts_f1_matrix_get(const struct TsF1Matrix *m, uintptr_t i, uintptr_t j, double *out);

void ts_f1_matrix_free(struct TsF1Matrix *m);

enum TsStatus ts_binary_map_new(const struct TsF1Matrix *m, double phi, struct TsBinaryMap **out);

enum TsStatus ts_binary_map_get(const struct TsBinaryMap *m,
                                uintptr_t i,
                                uintptr_t j,
                                uint8_t *out);

// Upper-triangle agreement in percent.
enum TsStatus ts_binary_map_match(const struct TsBinaryMap *a,
                                  const struct TsBinaryMap *b,
                                  double *out);

void ts_binary_map_free(struct TsBinaryMap *m);

enum TsStatus ts_material_db_builtin(struct TsMaterialDb **out);

enum TsStatus ts_material_db_load(const char *path, struct TsMaterialDb **out);

uintptr_t ts_material_db_len(const struct TsMaterialDb *db);

// Name of record `i`, owned by the database handle; NULL when out of range.
const char *ts_material_db_name(const struct TsMaterialDb *db, uintptr_t i);

enum TsStatus ts_material_db_range(const struct TsMaterialDb *db,
                                   uintptr_t i,
                                   struct TsMaterialRange *out);

void ts_material_db_free(struct TsMaterialDb *db);

enum TsStatus ts_trace_generate(const struct TsSensorParams *sensor,
                                double effusivity,
                                const struct TsContact *contact,
                                double time_offset,
                                uint64_t seed,
                                struct TsTrace **out);

// Reads `<stem>.csv` with its JSON sidecar.
enum TsStatus ts_trace_read(const char *csv_path, struct TsTrace **out);

uintptr_t ts_trace_len(const struct TsTrace *t);

// Borrowed pointer to the temperatures (°C), valid while the handle lives.
const double *ts_trace_temps(const struct TsTrace *t);

// Borrowed pointer to the sample times (s), valid while the handle lives.
const double *ts_trace_times(const struct TsTrace *t);

void ts_trace_free(struct TsTrace *t);

// Fits effusivity and a shared time offset to `count` traces with the
// sensor fixed; the offset is searched in [-1, 1] s.
enum TsStatus ts_fit_material(const struct TsTrace *const *traces,
                              uintptr_t count,
                              const struct TsSensorParams *sensor,
                              double e_lo,
                              double e_hi,
                              struct TsFitResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THERMOSENSE_H */
