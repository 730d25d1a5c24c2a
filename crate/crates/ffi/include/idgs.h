/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef IDGS_H
#define IDGS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum IdgsStatus {
  IDGS_STATUS_OK = 0,
  IDGS_STATUS_NULL_POINTER = 1,
  IDGS_STATUS_INVALID_ARGUMENT = 2,
  // No phase solution exists for the requested (n, k, p).
  IDGS_STATUS_INFEASIBLE = 3,
  // The run finished without a verified target.
  IDGS_STATUS_NOT_FOUND = 4,
  IDGS_STATUS_INTERNAL = 5,
} IdgsStatus;

// Opaque phase plan.
typedef struct IdgsPlanHandle IdgsPlanHandle;

// Opaque result of a distributed run.
typedef struct IdgsRunHandle IdgsRunHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failed call on this thread, or NULL. The
// pointer stays valid until the next call into the library on this thread.
const char *idgs_last_error(void);

// Library version as a static NUL-terminated string.
const char *idgs_version(void);

// Release a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed already.
void idgs_string_free(char *s);

// Plan IDGS for `n` input bits, `2^k` nodes and a `p`-bit stage-1 prefix.
// `mirrored` selects the (−θ, −φ) phase solution.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum IdgsStatus idgs_plan_new(size_t n,
                              size_t k,
                              size_t p,
                              bool mirrored,
                              struct IdgsPlanHandle **out);

// # Safety
// `plan` must be NULL or a handle from [`idgs_plan_new`] not yet freed.
void idgs_plan_free(struct IdgsPlanHandle *plan);

// Stage-1 iteration counts `p1` (global) and `p2` (local).
//
// # Safety
// `plan` must be a live plan handle; `p1` and `p2` must be writable.
enum IdgsStatus idgs_plan_iterations(const struct IdgsPlanHandle *plan, uint64_t *p1, uint64_t *p2);

// Phases `(θ, φ)` of the final generalised iterate.
//
// # Safety
// `plan` must be a live plan handle; `theta` and `phi` must be writable.
enum IdgsStatus idgs_plan_phases(const struct IdgsPlanHandle *plan, double *theta, double *phi);

// The plan as a JSON object; free with [`idgs_string_free`].
//
// # Safety
// `plan` must be a live plan handle; `out` must be writable.
enum IdgsStatus idgs_plan_to_json(const struct IdgsPlanHandle *plan, char **out);

// Run noiseless IDGS on the single-target oracle marking `target` (an
// MSB-first string of '0'/'1'). Node `i` is seeded with `seed + i`; at
// most `parallelism` nodes run at once.
//
// Returns `IDGS_STATUS_OK` and a handle when the run completes, whether or
// not the target was found; query [`idgs_run_target`] for the outcome.
//
// # Safety
// `target` must be a NUL-terminated string; `out` must be writable.
enum IdgsStatus idgs_run(const char *target,
                         size_t k,
                         size_t p,
                         uint64_t seed,
                         size_t parallelism,
                         struct IdgsRunHandle **out);

// # Safety
// `run` must be NULL or a handle from [`idgs_run`] not yet freed.
void idgs_run_free(struct IdgsRunHandle *run);

// The verified target as a string (free with [`idgs_string_free`]), or
// `IDGS_STATUS_NOT_FOUND` with `*out` set to NULL.
//
// # Safety
// `run` must be a live run handle; `out` must be writable.
enum IdgsStatus idgs_run_target(const struct IdgsRunHandle *run, char **out);

// Plan, node reports and outcome as JSON; free with [`idgs_string_free`].
//
// # Safety
// `run` must be a live run handle; `out` must be writable.
enum IdgsStatus idgs_run_to_json(const struct IdgsRunHandle *run, char **out);

// Overall circuit depth and the Grover baseline depth for `(n, k, p)`.
//
// # Safety
// `overall` and `baseline` must be writable.
enum IdgsStatus idgs_depth(size_t n, size_t k, size_t p, int64_t *overall, int64_t *baseline);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IDGS_H */
