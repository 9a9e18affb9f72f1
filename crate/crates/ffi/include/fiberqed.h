#ifndef FIBERQED_H
#define FIBERQED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum FqStatus {
  FQ_STATUS_OK = 0,
  FQ_STATUS_NULL_POINTER = 1,
  FQ_STATUS_INVALID_UTF8 = 2,
  FQ_STATUS_CONFIG = 3,
  FQ_STATUS_PARAMETER = 4,
  FQ_STATUS_CONSTRAINT_VIOLATED = 5,
  FQ_STATUS_OUT_OF_RANGE = 6,
  FQ_STATUS_NUMERICAL = 7,
  FQ_STATUS_BUFFER_TOO_SMALL = 8,
  FQ_STATUS_PANIC = 9,
} FqStatus;

/**
 * Completed cascade.
 */
typedef struct FqCascade FqCascade;

/**
 * Parsed run configuration.
 */
typedef struct FqConfig FqConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *fq_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated).
 * `*len` receives the message length without the terminator.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes or be null with `cap = 0`;
 * `len` must be valid for writes or null.
 */
enum FqStatus fq_last_error(char *buf, size_t cap, size_t *len);

/**
 * Parses configuration text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum FqStatus fq_config_parse(const char *text, struct FqConfig **out);

/**
 * # Safety
 * `cfg` must come from [`fq_config_parse`] and not be used afterwards.
 */
void fq_config_free(struct FqConfig *cfg);

/**
 * Overrides the coupling constant.
 *
 * # Safety
 * `cfg` must be a live configuration handle.
 */
enum FqStatus fq_config_set_alpha(struct FqConfig *cfg, double alpha);

/**
 * Writes whether every parameter constraint holds and the number failing.
 *
 * # Safety
 * `cfg` must be a live handle; the out pointers must be valid or null.
 */
enum FqStatus fq_validate(const struct FqConfig *cfg, bool *all_pass, size_t *failures);

/**
 * Runs the cascade. Fails with `ConstraintViolated` when a parameter
 * relation fails and the configuration does not set `allow_invalid`.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be valid for writes.
 */
enum FqStatus fq_cascade_run(const struct FqConfig *cfg, struct FqCascade **out);

/**
 * # Safety
 * `c` must come from [`fq_cascade_run`] and not be used afterwards.
 */
void fq_cascade_free(struct FqCascade *c);

/**
 * Number of scale records (`J + 1`); zero for a null handle.
 *
 * # Safety
 * `c` must be a live handle or null.
 */
size_t fq_cascade_len(const struct FqCascade *c);

/**
 * Ground energy, gradient and step norm at scale `j`. `grad` receives three
 * values; the step norm is NaN on the last scale.
 *
 * # Safety
 * `c` must be a live handle; `energy` and `step_norm` valid for one write or
 * null, `grad` valid for three writes or null.
 */
enum FqStatus fq_cascade_scale(const struct FqCascade *c,
                               size_t j,
                               double *energy,
                               double *grad,
                               double *step_norm);

/**
 * Copies `Ψ^{σ_j}` in full-basis coordinates. `*len` receives the
 * dimension; pass a null `buf` to query it.
 *
 * # Safety
 * `buf` must hold `cap` doubles or be null; `len` must be valid for writes.
 */
enum FqStatus fq_cascade_state(const struct FqCascade *c,
                               size_t j,
                               double *buf,
                               size_t cap,
                               size_t *len);

/**
 * Second derivative of the ground energy along the momentum axis at scale
 * `j`, by the H-picture and canonical-form contour routes.
 *
 * # Safety
 * `c` must be a live handle; out pointers valid for one write or null.
 */
enum FqStatus fq_cascade_curvature(const struct FqCascade *c,
                                   size_t j,
                                   double *d2e_h,
                                   double *d2e_k);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FIBERQED_H */
