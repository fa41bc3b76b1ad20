#ifndef MARKOV_BINOMIAL_H
#define MARKOV_BINOMIAL_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum {
  MB_STATUS_OK = 0,
  MB_STATUS_NULL_POINTER = 1,
  MB_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Length is zero or above the exact-computation cap, or an index is out of range.
   */
  MB_STATUS_OUT_OF_RANGE = 3,
  /**
   * The operation needs the other dispersion regime.
   */
  MB_STATUS_WRONG_REGIME = 4,
  /**
   * The binomial match has no usable integer index.
   */
  MB_STATUS_DEGENERATE_FIT = 5,
  /**
   * A caller buffer is too small; the required length is reported.
   */
  MB_STATUS_BUFFER_TOO_SMALL = 6,
  /**
   * A numerical invariant failed; indicates a bug.
   */
  MB_STATUS_NUMERICAL = 7,
  /**
   * A panic was caught at the boundary.
   */
  MB_STATUS_INTERNAL = 8,
} MbStatus;

typedef enum {
  MB_REGIME_OVERDISPERSED = 0,
  MB_REGIME_EQUIDISPERSED = 1,
  MB_REGIME_UNDERDISPERSED = 2,
} MbRegime;

/**
 * Law of the anchoring state `Y_0`, which is not part of the sum.
 */
typedef enum {
  MB_START_STATIONARY = 0,
  MB_START_STATE0 = 1,
  MB_START_STATE1 = 2,
  /**
   * Uses the `p1` argument as `P(Y_0 = 1)`.
   */
  MB_START_CUSTOM = 3,
} MbStart;

/**
 * Opaque two-state chain.
 */
typedef struct MbChain MbChain;

/**
 * Opaque probability mass function on `0..len`.
 */
typedef struct MbPmf MbPmf;

typedef struct {
  double mean;
  double variance;
  double a0;
  double a1;
} MbMoments;

/**
 * Negative-binomial match; `poisson_limit != 0` means the Poisson law with
 * mean `lambda` (then `r` is infinite and `q` is 1).
 */
typedef struct {
  double r;
  double q;
  double lambda;
  int32_t poisson_limit;
} MbNbFit;

typedef struct {
  double m_tilde;
  uint64_t m;
  double theta;
  double epsilon;
} MbBinFit;

typedef struct {
  MbRegime regime;
  double bound;
  /**
   * `min(1, bound)`.
   */
  double clipped;
} MbBound;

typedef struct {
  MbRegime regime;
  double tv;
  /**
   * Reference mass beyond the truncation point.
   */
  double tail;
} MbDistance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a chain with `P(0 -> 1) = alpha`, `P(1 -> 1) = beta`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
MbStatus mb_chain_new(double alpha, double beta, MbChain **out);

/**
 * Releases a chain; null is ignored.
 *
 * # Safety
 * `chain` must come from [`mb_chain_new`] and not be used afterwards.
 */
void mb_chain_free(MbChain *chain);

/**
 * Stationary probability of state 1.
 *
 * # Safety
 * `chain` must be a live handle and `out` writable.
 */
MbStatus mb_chain_stationary(const MbChain *chain, double *out);

/**
 * Closed-form mean and variance of the stationary sum of `n` states.
 *
 * # Safety
 * `chain` must be a live handle and `out` writable.
 */
MbStatus mb_chain_moments(const MbChain *chain, size_t n, MbMoments *out);

/**
 * # Safety
 * `chain` must be a live handle and `out` writable.
 */
MbStatus mb_chain_regime(const MbChain *chain, size_t n, MbRegime *out);

/**
 * Exact law of the sum of `n` states after an anchor drawn from `start`,
 * one of the [`MbStart`] values (`p1` is read only for `MB_START_CUSTOM`).
 *
 * # Safety
 * `chain` must be a live handle and `out` writable.
 */
MbStatus mb_chain_exact_pmf(const MbChain *chain, size_t n, int32_t start, double p1, MbPmf **out);

/**
 * Negative-binomial match; fails with `WrongRegime` when underdispersed.
 *
 * # Safety
 * `chain` must be a live handle and `out` writable.
 */
MbStatus mb_fit_negative_binomial(const MbChain *chain, size_t n, MbNbFit *out);

/**
 * Binomial match; fails with `WrongRegime` unless underdispersed and with
 * `DegenerateFit` when no usable index exists.
 *
 * # Safety
 * `chain` must be a live handle and `out` writable.
 */
MbStatus mb_fit_binomial(const MbChain *chain, size_t n, MbBinFit *out);

/**
 * Total-variation bound for the approximation matching the regime.
 *
 * # Safety
 * `chain` must be a live handle and `out` writable.
 */
MbStatus mb_bound(const MbChain *chain, size_t n, MbBound *out);

/**
 * Exact distance from the stationary sum to its fitted law (`O(n^2)`).
 *
 * # Safety
 * `chain` must be a live handle and `out` writable.
 */
MbStatus mb_exact_tv_to_fit(const MbChain *chain, size_t n, MbDistance *out);

/**
 * Releases a mass function; null is ignored.
 *
 * # Safety
 * `pmf` must come from this library and not be used afterwards.
 */
void mb_pmf_free(MbPmf *pmf);

/**
 * Number of stored support points; 0 for a null handle.
 *
 * # Safety
 * `pmf` must be null or a live handle.
 */
size_t mb_pmf_len(const MbPmf *pmf);

/**
 * Copies the masses into `buffer`. `written` receives the number of
 * entries copied, or the required length on `BufferTooSmall`.
 *
 * # Safety
 * `pmf` must be a live handle, `buffer` valid for `capacity` doubles and
 * `written` writable.
 */
MbStatus mb_pmf_copy(const MbPmf *pmf, double *buffer, size_t capacity, size_t *written);

/**
 * Total-variation distance between two mass functions.
 *
 * # Safety
 * Both handles must be live and `out` writable.
 */
MbStatus mb_pmf_tv_distance(const MbPmf *a, const MbPmf *b, double *out);

/**
 * Copies the last error message of this thread into `buffer` (always
 * NUL-terminated when `capacity > 0`) and returns the full message length
 * without the terminator; 0 when there is no error.
 *
 * # Safety
 * `buffer` must be valid for `capacity` bytes, or null with `capacity == 0`.
 */
size_t mb_last_error_message(char *buffer, size_t capacity);

/**
 * Static, NUL-terminated name of an [`MbStatus`] value.
 */
const char *mb_status_name(int32_t status);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mb_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MARKOV_BINOMIAL_H */
