#ifndef SHAPEGEN_H
#define SHAPEGEN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum ShapegenStatus {
  SHAPEGEN_STATUS_OK = 0,
  SHAPEGEN_STATUS_PARSE = 1,
  SHAPEGEN_STATUS_AMBIGUOUS = 2,
  SHAPEGEN_STATUS_INIT_FAILED = 3,
  SHAPEGEN_STATUS_CHAIN_FAILED = 4,
  SHAPEGEN_STATUS_INVALID_ARGUMENT = 5,
  SHAPEGEN_STATUS_INTERNAL = 6,
} ShapegenStatus;

// Point sampler variant.
typedef enum ShapegenVariant {
  SHAPEGEN_VARIANT_REJECTION = 0,
  SHAPEGEN_VARIANT_HR = 1,
  SHAPEGEN_VARIANT_HR_SHRINK = 2,
  SHAPEGEN_VARIANT_CDHR = 3,
  SHAPEGEN_VARIANT_CDHR_SHRINK = 4,
} ShapegenVariant;

// Initial-point search.
typedef enum ShapegenInit {
  SHAPEGEN_INIT_PSO = 0,
  SHAPEGEN_INIT_PATTERN = 1,
  SHAPEGEN_INIT_AUTO = 2,
} ShapegenInit;

// A parsed spec.
typedef struct ShapegenSpec ShapegenSpec;

// Options for [`shapegen_sample_json`]. Start from
// [`shapegen_sample_options_default`] and override fields.
typedef struct ShapegenSampleOptions {
  uint64_t seed;
  size_t count;
  // Boltzmann parameter; NaN to tune from `mean_length` instead.
  double z;
  double mean_length;
  enum ShapegenVariant variant;
  size_t burn_in;
  size_t thin;
  enum ShapegenInit init;
  size_t pso_swarm;
  size_t pso_iterations;
  size_t pso_restarts;
  // NaN keeps the spec's own value.
  double epsilon;
  double dt;
  bool project_continuity;
  // Include the rendered `(t, value)` samples in the output.
  bool include_signals;
} ShapegenSampleOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// JSON text of the last error on this thread, or NULL after a successful
// call. Valid until the next call on the same thread; do not free.
const char *shapegen_last_error(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed already.
void shapegen_string_free(char *s);

// Library version as a static string.
const char *shapegen_version(void);

// Parses spec text and compiles its parameter space.
//
// # Safety
// `text` must be a NUL-terminated UTF-8 string; `out` must be writable.
enum ShapegenStatus shapegen_spec_parse(const char *text, struct ShapegenSpec **out);

// Releases a spec handle. NULL is ignored.
//
// # Safety
// `spec` must come from [`shapegen_spec_parse`] and not be used afterwards.
void shapegen_spec_free(struct ShapegenSpec *spec);

// Ambiguity report as JSON. Returns `Ambiguous` (and still writes the
// report) when the regex has a witness word.
//
// # Safety
// `spec` must be a live handle; `out` must be writable.
enum ShapegenStatus shapegen_check_json(const struct ShapegenSpec *spec, char **out);

// Number of free dimensions of the parameter space.
//
// # Safety
// `spec` must be a live handle; `out` must be writable.
enum ShapegenStatus shapegen_spec_free_dims(const struct ShapegenSpec *spec, size_t *out);

// Name of free dimension `index`, for ordering the vectors passed to
// [`shapegen_contains`].
//
// # Safety
// `spec` must be a live handle; `out` must be writable.
enum ShapegenStatus shapegen_spec_dim_name(const struct ShapegenSpec *spec,
                                           size_t index,
                                           char **out);

// Membership of a free-parameter vector in the constraint set.
//
// # Safety
// `x` must point to `len` doubles; `out` must be writable.
enum ShapegenStatus shapegen_contains(const struct ShapegenSpec *spec,
                                      const double *x,
                                      size_t len,
                                      int *out);

// Generating function, convergence radius, mean-length function and the
// first `terms` Taylor coefficients as JSON.
//
// # Safety
// `spec` must be a live handle; `out` must be writable.
enum ShapegenStatus shapegen_genfun_json(const struct ShapegenSpec *spec, size_t terms, char **out);

// Boltzmann parameter whose expected word length is `mean_length`.
//
// # Safety
// `spec` must be a live handle; `z_out` must be writable.
enum ShapegenStatus shapegen_tune(const struct ShapegenSpec *spec,
                                  double mean_length,
                                  double *z_out);

// `count` Boltzmann words at parameter `z` as a JSON array of atom arrays.
//
// # Safety
// `spec` must be a live handle; `out` must be writable.
enum ShapegenStatus shapegen_words_json(const struct ShapegenSpec *spec,
                                        uint64_t seed,
                                        double z,
                                        size_t count,
                                        char **out);

// Defaults matching the command line.
struct ShapegenSampleOptions shapegen_sample_options_default(void);

// Runs the full word, valuation and signal pipeline. The output JSON has a
// `report` object and a `samples` array of `{step, word_id, word,
// valuation}` records, plus `signal` when `include_signals` is set.
//
// # Safety
// `spec` must be a live handle; `options` may be NULL for defaults;
// `out` must be writable.
enum ShapegenStatus shapegen_sample_json(const struct ShapegenSpec *spec,
                                         const struct ShapegenSampleOptions *options,
                                         char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHAPEGEN_H */
