#ifndef LRPERC_H
#define LRPERC_H

#pragma once

/* Generated by cbindgen from lrperc-ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum LrpStatus {
  LRP_STATUS_OK = 0,
  LRP_STATUS_NULL_POINTER = 1,
  LRP_STATUS_INVALID_UTF8 = 2,
  LRP_STATUS_INVALID_PARAMETER = 3,
  LRP_STATUS_DIMENSION_MISMATCH = 4,
  LRP_STATUS_DIVERGENT_TAIL = 5,
  LRP_STATUS_BUDGET_INFEASIBLE = 6,
  LRP_STATUS_TOO_LARGE = 7,
  LRP_STATUS_OUT_OF_RANGE = 8,
  LRP_STATUS_PARSE = 9,
  LRP_STATUS_INTERNAL = 10,
  LRP_STATUS_PANIC = 11,
} LrpStatus;

/**
 * Opaque sampled configuration on a finite box.
 */
typedef struct LrpConfig LrpConfig;

/**
 * Opaque interaction kernel.
 */
typedef struct LrpKernel LrpKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *lrperc_last_error(void);

/**
 * Parses a kernel description such as `power_law(C=1,s=4)` or `nn(w=1)`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string and `out` a writable pointer.
 */
enum LrpStatus lrperc_kernel_parse(const char *spec, uintptr_t dim, struct LrpKernel **out);

/**
 * Kernel value `J(x)` at a nonzero displacement with `dim` coordinates.
 *
 * # Safety
 * `kernel` must come from [`lrperc_kernel_parse`]; `x` must point to the
 * kernel's dimension many integers; `out` must be writable.
 */
enum LrpStatus lrperc_kernel_eval(const struct LrpKernel *kernel, const int64_t *x, double *out);

/**
 * Releases a kernel. Null is accepted.
 *
 * # Safety
 * `kernel` must be null or an unreleased handle from this library.
 */
void lrperc_kernel_free(struct LrpKernel *kernel);

/**
 * Samples the open edges of `β·J` percolation on the box of side
 * `2·radius + 1` centred at the origin. Identical arguments reproduce the
 * same configuration.
 *
 * # Safety
 * `kernel` must be a live handle and `out` writable.
 */
enum LrpStatus lrperc_sample_box(const struct LrpKernel *kernel,
                                 double beta,
                                 int64_t radius,
                                 uint64_t seed,
                                 double miss_budget,
                                 struct LrpConfig **out);

/**
 * Number of vertices in the configuration's box.
 *
 * # Safety
 * `cfg` must be null or a live handle.
 */
uintptr_t lrperc_config_num_vertices(const struct LrpConfig *cfg);

/**
 * Number of open edges.
 *
 * # Safety
 * `cfg` must be null or a live handle.
 */
uintptr_t lrperc_config_num_edges(const struct LrpConfig *cfg);

/**
 * Endpoints of edge `i` as vertex indices.
 *
 * # Safety
 * `cfg` must be a live handle; `a` and `b` must be writable.
 */
enum LrpStatus lrperc_config_edge(const struct LrpConfig *cfg,
                                  uintptr_t i,
                                  uintptr_t *a,
                                  uintptr_t *b);

/**
 * Coordinates of vertex `v`, written to `coords[0..dim]`.
 *
 * # Safety
 * `cfg` must be a live handle and `coords` must have room for the
 * configuration's dimension many integers.
 */
enum LrpStatus lrperc_config_point(const struct LrpConfig *cfg, uintptr_t v, int64_t *coords);

/**
 * Size of the largest open cluster.
 *
 * # Safety
 * `cfg` must be null or a live handle.
 */
uintptr_t lrperc_config_largest_cluster(const struct LrpConfig *cfg);

/**
 * Plain-text serialization. The returned string must be released with
 * [`lrperc_string_free`].
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum LrpStatus lrperc_config_to_text(const struct LrpConfig *cfg, char **out);

/**
 * Rebuilds a configuration from [`lrperc_config_to_text`] output.
 *
 * # Safety
 * `text` must be NUL-terminated and `out` writable.
 */
enum LrpStatus lrperc_config_from_text(const char *text, struct LrpConfig **out);

/**
 * Releases a configuration. Null is accepted.
 *
 * # Safety
 * `cfg` must be null or an unreleased handle from this library.
 */
void lrperc_config_free(struct LrpConfig *cfg);

/**
 * Releases a string returned by this library. Null is accepted.
 *
 * # Safety
 * `s` must be null or a string allocated by this library.
 */
void lrperc_string_free(char *s);

/**
 * Monte Carlo estimate of `P(0 ↔ ∂B_n)`.
 *
 * # Safety
 * `kernel` must be a live handle; `value` and `stderr` must be writable.
 */
enum LrpStatus lrperc_boundary_connection_prob(const struct LrpKernel *kernel,
                                               double beta,
                                               int64_t n,
                                               uintptr_t replicates,
                                               uint64_t seed,
                                               double *value,
                                               double *stderr);

/**
 * Exact `φ_β(S)` for a finite set containing the origin, given as
 * `count` points of the kernel's dimension laid out contiguously. Writes the
 * value and a rigorous upper bound; `upper < 1` certifies `β ≤ β_c`.
 *
 * # Safety
 * `kernel` must be a live handle; `points` must hold `count · dim`
 * integers; `value` and `upper` must be writable.
 */
enum LrpStatus lrperc_phi(const struct LrpKernel *kernel,
                          double beta,
                          const int64_t *points,
                          uintptr_t count,
                          double *value,
                          double *upper);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* LRPERC_H */
