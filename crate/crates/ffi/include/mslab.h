#ifndef MSLAB_H
#define MSLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MslabStatus {
  MSLAB_STATUS_OK = 0,
  MSLAB_STATUS_NULL_POINTER = 1,
  MSLAB_STATUS_INVALID_ARGUMENT = 2,
  MSLAB_STATUS_PARSE = 3,
  MSLAB_STATUS_DOMAIN = 4,
  /**
   * `ζ` lies within the refusal radius of the boundary spectrum.
   */
  MSLAB_STATUS_NEAR_SPECTRUM = 5,
  MSLAB_STATUS_QUADRATURE = 6,
  MSLAB_STATUS_NO_CONVERGENCE = 7,
  MSLAB_STATUS_BUFFER_TOO_SMALL = 8,
  MSLAB_STATUS_INTERNAL = 9,
  MSLAB_STATUS_PANIC = 10,
} MslabStatus;

/**
 * Opaque inner function.
 */
typedef struct MslabInner MslabInner;

/**
 * Opaque matrix of `Q_ζ` in the Clark basis at `ζ`, with its measure.
 */
typedef struct MslabOperator MslabOperator;

typedef struct MslabComplex {
  double re;
  double im;
} MslabComplex;

/**
 * `u(ζ)`, `u′(ζ)`, `u″(ζ)` and `|u′(ζ)|`.
 */
typedef struct MslabBoundaryJet {
  struct MslabComplex value;
  struct MslabComplex first;
  struct MslabComplex second;
  double abs_first;
} MslabBoundaryJet;

typedef struct MslabAtom {
  double theta;
  double mass;
} MslabAtom;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *mslab_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mslab_version(void);

/**
 * Parses an inner-function spec such as `"blaschke:0.5,0.2+0.1i"` or
 * `"singular:xi=0,s=1"`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string and `out` a writable pointer.
 */
enum MslabStatus mslab_inner_parse(const char *spec, struct MslabInner **out);

/**
 * # Safety
 * `inner` must come from [`mslab_inner_parse`] and not have been freed.
 */
void mslab_inner_free(struct MslabInner *inner);

/**
 * # Safety
 * `inner` must be a live handle and `out` writable.
 */
enum MslabStatus mslab_inner_eval(const struct MslabInner *inner,
                                  struct MslabComplex z,
                                  struct MslabComplex *out);

/**
 * # Safety
 * `inner` must be a live handle and `out` writable.
 */
enum MslabStatus mslab_inner_boundary_jet(const struct MslabInner *inner,
                                          double theta,
                                          struct MslabBoundaryJet *out);

/**
 * Distance from `e^{iθ}` to the boundary spectrum (infinite when empty).
 *
 * # Safety
 * `inner` must be a live handle and `out` writable.
 */
enum MslabStatus mslab_inner_spectrum_distance(const struct MslabInner *inner,
                                               double theta,
                                               double *out);

/**
 * Builds `Q_ζ` in the Clark basis for `α = u(e^{iθ})`. `window` is the
 * symmetric atom window for the singular family and ignored otherwise.
 *
 * # Safety
 * `inner` must be a live handle and `out` writable.
 */
enum MslabStatus mslab_operator_new(const struct MslabInner *inner,
                                    double theta,
                                    size_t window,
                                    struct MslabOperator **out);

/**
 * # Safety
 * `op` must come from [`mslab_operator_new`] and not have been freed.
 */
void mslab_operator_free(struct MslabOperator *op);

/**
 * Matrix dimension, or 0 for a null handle.
 *
 * # Safety
 * `op` must be null or a live handle.
 */
size_t mslab_operator_dim(const struct MslabOperator *op);

/**
 * Index of the atom at `ζ` in the Clark basis.
 *
 * # Safety
 * `op` must be a live handle and `out` writable.
 */
enum MslabStatus mslab_operator_base_index(const struct MslabOperator *op, size_t *out);

/**
 * # Safety
 * `op` must be a live handle and `out` writable.
 */
enum MslabStatus mslab_operator_entry(const struct MslabOperator *op,
                                      size_t i,
                                      size_t j,
                                      struct MslabComplex *out);

/**
 * `y = Q x` for `x`, `y` of length `dim`.
 *
 * # Safety
 * `x` must point to `len` readable values and `y` to `len` writable ones.
 */
enum MslabStatus mslab_operator_apply(const struct MslabOperator *op,
                                      const struct MslabComplex *x,
                                      struct MslabComplex *y,
                                      size_t len);

/**
 * Largest singular value of the matrix.
 *
 * # Safety
 * `op` must be a live handle and `out` writable.
 */
enum MslabStatus mslab_operator_norm(const struct MslabOperator *op, double *out);

/**
 * Copies the Clark atoms in ascending angle. `len` receives the atom count;
 * when `capacity` is smaller nothing is copied and `BufferTooSmall` is
 * returned. `atoms` may be null when `capacity` is 0.
 *
 * # Safety
 * `atoms` must point to `capacity` writable values and `len` be writable.
 */
enum MslabStatus mslab_operator_atoms(const struct MslabOperator *op,
                                      struct MslabAtom *atoms,
                                      size_t capacity,
                                      size_t *len);

/**
 * Runs a verification suite (`"all"` for every applicable one) with default
 * options and the given seed. `out` receives one JSON report per line, to be
 * released with [`mslab_string_free`]; `passed` receives 1 when every margin
 * passes.
 *
 * # Safety
 * `inner` must be a live handle, `suite` a NUL-terminated string and `out`,
 * `passed` writable.
 */
enum MslabStatus mslab_verify_json(const struct MslabInner *inner,
                                   double theta,
                                   const char *suite,
                                   uint64_t seed,
                                   char **out,
                                   int32_t *passed);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void mslab_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MSLAB_H */
