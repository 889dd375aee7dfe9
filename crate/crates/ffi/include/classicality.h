#ifndef CLASSICALITY_H
#define CLASSICALITY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ClStatus {
  CL_STATUS_OK = 0,
  CL_STATUS_NULL_POINTER = 1,
  CL_STATUS_INVALID_ARGUMENT = 2,
  CL_STATUS_QUADRATURE = 3,
  CL_STATUS_IO = 4,
  CL_STATUS_DOMAIN = 5,
  CL_STATUS_PANIC = 6,
} ClStatus;

// Handle to a probability table.
typedef struct ClProbabilityTable ClProbabilityTable;

// Handle to a tessellation `T(k)`.
typedef struct ClTessellation ClTessellation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *cl_last_error_message(void);

// Builds `T(k)`.
//
// # Safety
// `out` must be valid for writes.
enum ClStatus cl_tessellation_new(uint32_t k, struct ClTessellation **out);

// Releases a tessellation; null is ignored.
//
// # Safety
// `tess` must come from [`cl_tessellation_new`] and not be used afterwards.
void cl_tessellation_free(struct ClTessellation *tess);

// Number of tiles `L`.
//
// # Safety
// `tess` must be a live handle and `out` valid for writes.
enum ClStatus cl_tessellation_len(const struct ClTessellation *tess, size_t *out);

// Radius of the largest circle around a sampled point inside its tile, minimised over tiles.
//
// # Safety
// `tess` must be a live handle and `out` valid for writes.
enum ClStatus cl_tessellation_inscribed_delta(const struct ClTessellation *tess, double *out);

// Resolution that also bounds the gap between each tile and its patch boundary.
//
// # Safety
// `tess` must be a live handle and `out` valid for writes.
enum ClStatus cl_tessellation_strict_delta(const struct ClTessellation *tess, double *out);

// Sampled point of tile `index` (1-based).
//
// # Safety
// `tess` must be a live handle and `theta`, `phi` valid for writes.
enum ClStatus cl_tessellation_sampled_point(const struct ClTessellation *tess,
                                            size_t index,
                                            double *theta,
                                            double *phi);

// Index of the tile containing `(theta, phi)`.
//
// # Safety
// `tess` must be a live handle and `out` valid for writes.
enum ClStatus cl_tessellation_locate(const struct ClTessellation *tess,
                                     double theta,
                                     double phi,
                                     size_t *out);

// su(2) threshold `ln ε / ln cos(δ/2) + n` and its ceiling.
//
// # Safety
// `real` and `integer` must be valid for writes.
enum ClStatus cl_nt_su2(double eps, double delta, uint64_t n, double *real, uint64_t *integer);

// su(1,1) threshold for Bargmann index `k`.
//
// # Safety
// `real` and `integer` must be valid for writes.
enum ClStatus cl_nt_su11(double eps, double delta, double k, double *real, uint64_t *integer);

// Bosonic threshold `−ln ε / δ²`.
//
// # Safety
// `real` and `integer` must be valid for writes.
enum ClStatus cl_nt_boson(double eps, double delta, double *real, uint64_t *integer);

// Resolution `δ` at which the su(2) threshold equals `nt`.
//
// # Safety
// `out` must be valid for writes.
enum ClStatus cl_delta_for_nt(double eps, double nt, uint64_t n, double *out);

// Radius of the ε-support cap for spin `J = twice_j / 2`.
//
// # Safety
// `out` must be valid for writes.
enum ClStatus cl_epsilon_support_radius(uint32_t twice_j, double eps, double *out);

// Null-outcome probability `ε^{2+1/J}`.
//
// # Safety
// `out` must be valid for writes.
enum ClStatus cl_p_null(uint32_t twice_j, double eps, double *out);

// Monge distance between coherent states at geodesic distance `theta`.
//
// # Safety
// `out` must be valid for writes.
enum ClStatus cl_monge_su2(uint32_t twice_j, double theta, double tol, double *out);

// Outcome probabilities for the state at `(theta, phi)` of `size` spins
// reduced by `reduction`. With `truncated` false, `eps` is ignored.
//
// # Safety
// `tess` must be a live handle and `out` valid for writes.
enum ClStatus cl_probability_table_new(const struct ClTessellation *tess,
                                       uint64_t size,
                                       uint64_t reduction,
                                       double theta,
                                       double phi,
                                       bool truncated,
                                       double eps,
                                       double tol,
                                       struct ClProbabilityTable **out);

// Releases a table; null is ignored.
//
// # Safety
// `table` must come from [`cl_probability_table_new`] and not be used afterwards.
void cl_probability_table_free(struct ClProbabilityTable *table);

// Number of tile entries.
//
// # Safety
// `table` must be a live handle and `out` valid for writes.
enum ClStatus cl_probability_table_len(const struct ClProbabilityTable *table, size_t *out);

// Probability of the outcome of tile `index` (1-based).
//
// # Safety
// `table` must be a live handle and `out` valid for writes.
enum ClStatus cl_probability_table_entry(const struct ClProbabilityTable *table,
                                         size_t index,
                                         double *out);

// Probability of the null outcome; 0 for exact tables.
//
// # Safety
// `table` must be a live handle and `out` valid for writes.
enum ClStatus cl_probability_table_p_null(const struct ClProbabilityTable *table, double *out);

// Draws `shots` outcomes from one seeded stream. Each is written as its
// tile index, or 0 for the null outcome.
//
// # Safety
// `table` must be a live handle and `outcomes` valid for `shots` writes.
enum ClStatus cl_probability_table_sample(const struct ClProbabilityTable *table,
                                          uint64_t seed,
                                          size_t shots,
                                          size_t *outcomes);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLASSICALITY_H */
