#ifndef REGRADE_H
#define REGRADE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RgCase {
  /**
   * Sinks hold at least as much volume as sources.
   */
  RG_CASE_SINK_EXCESS = 1,
  /**
   * Sources hold more volume than sinks.
   */
  RG_CASE_SOURCE_EXCESS = 2,
} RgCase;

typedef enum RgStatus {
  RG_STATUS_OK = 0,
  RG_STATUS_NULL_POINTER = 1,
  RG_STATUS_INVALID_ARGUMENT = 2,
  RG_STATUS_PARSE = 3,
  RG_STATUS_INFEASIBLE = 4,
  RG_STATUS_IO = 5,
  RG_STATUS_OUT_OF_RANGE = 6,
  RG_STATUS_PANIC = 7,
} RgStatus;

typedef struct RgHeightMap RgHeightMap;

typedef struct RgNodeSet RgNodeSet;

typedef struct RgPlan RgPlan;

typedef struct RgMove {
  size_t source;
  size_t sink;
  double src_x;
  double src_y;
  double dst_x;
  double dst_y;
  double volume;
} RgMove;

typedef struct RgMetrics {
  double grade_deg;
  double smoothness_m;
  double area_oos_m2;
  double area_oos_fraction;
} RgMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread, or NULL. Valid until the next call
 * into this library from the same thread.
 */
const char *rg_last_error(void);

/**
 * Library version, a static string.
 */
const char *rg_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void rg_string_free(char *s);

/**
 * Empty node set.
 */
struct RgNodeSet *rg_nodeset_new(void);

/**
 * # Safety
 * `set` must be NULL or a handle from this library not yet freed.
 */
void rg_nodeset_free(struct RgNodeSet *set);

/**
 * # Safety
 * `set` must be a live node set handle.
 */
enum RgStatus rg_nodeset_add_source(struct RgNodeSet *set, double x, double y, double volume);

/**
 * # Safety
 * `set` must be a live node set handle.
 */
enum RgStatus rg_nodeset_add_sink(struct RgNodeSet *set, double x, double y, double volume);

/**
 * Parses `{"sources":[{"x","y","v"}...],"sinks":[...]}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum RgStatus rg_nodeset_from_json(const char *json, struct RgNodeSet **out);

/**
 * Minimum-work transport plan for the node set.
 *
 * # Safety
 * `set` must be a live node set handle; `out` must be writable.
 */
enum RgStatus rg_solve_transport(const struct RgNodeSet *set, struct RgPlan **out);

/**
 * # Safety
 * `plan` must be NULL or a handle from this library not yet freed.
 */
void rg_plan_free(struct RgPlan *plan);

/**
 * # Safety
 * `plan` must be a live plan handle; `out` must be writable.
 */
enum RgStatus rg_plan_objective(const struct RgPlan *plan, double *out);

/**
 * # Safety
 * `plan` must be a live plan handle; `out` must be writable.
 */
enum RgStatus rg_plan_case(const struct RgPlan *plan, enum RgCase *out);

/**
 * Number of nonzero moves; 0 for a NULL plan.
 *
 * # Safety
 * `plan` must be NULL or a live plan handle.
 */
size_t rg_plan_move_count(const struct RgPlan *plan);

/**
 * # Safety
 * `plan` must be a live plan handle; `out` must be writable.
 */
enum RgStatus rg_plan_move(const struct RgPlan *plan, size_t index, struct RgMove *out);

/**
 * Plan as JSON; free with `rg_string_free`.
 *
 * # Safety
 * `plan` must be a live plan handle; `out` must be writable.
 */
enum RgStatus rg_plan_to_json(const struct RgPlan *plan, char **out);

/**
 * Height map from `width × height` row-major heights, first row at the
 * minimum y.
 *
 * # Safety
 * `heights` must point to `width * height` doubles; `out` must be writable.
 */
enum RgStatus rg_heightmap_from_heights(size_t width,
                                        size_t height,
                                        double resolution,
                                        double origin_x,
                                        double origin_y,
                                        const double *heights,
                                        struct RgHeightMap **out);

/**
 * Loads a `.csv` or `.pgm` map. `resolution <= 0` keeps the CSV header
 * value (PGM requires a positive one).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum RgStatus rg_heightmap_load(const char *path,
                                double resolution,
                                double scale,
                                struct RgHeightMap **out);

/**
 * # Safety
 * `map` must be NULL or a handle from this library not yet freed.
 */
void rg_heightmap_free(struct RgHeightMap *map);

/**
 * Grade, smoothness and out-of-spec area with an odd `window`.
 *
 * # Safety
 * `map` must be a live map handle; `out` must be writable.
 */
enum RgStatus rg_heightmap_metrics(const struct RgHeightMap *map,
                                   double grade_spec_deg,
                                   double smooth_spec_m,
                                   size_t window,
                                   struct RgMetrics *out);

/**
 * Runs one grading episode on the configured site and returns the report
 * JSON. `config_json` may be NULL for defaults; it uses the same schema as
 * the command-line config file.
 *
 * # Safety
 * `config_json` must be NULL or NUL-terminated; `out` must be writable.
 */
enum RgStatus rg_simulate(uint64_t seed, const char *config_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REGRADE_H */
