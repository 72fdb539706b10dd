#ifndef FEDSEC_H
#define FEDSEC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define FEDSEC_OK 0

/**
 * A required pointer argument was null.
 */
#define FEDSEC_ERR_NULL -1

/**
 * The library panicked; the handle involved should be freed.
 */
#define FEDSEC_ERR_PANIC -2

/**
 * A probe callback reported failure.
 */
#define FEDSEC_ERR_CALLBACK -3

/**
 * An output buffer was too small.
 */
#define FEDSEC_ERR_BUFFER -4

typedef enum FedsecVerdict {
  FEDSEC_VERDICT_REJECT = 0,
  FEDSEC_VERDICT_ACCEPT = 1,
  FEDSEC_VERDICT_ACCEPT_FORCED = 2,
  FEDSEC_VERDICT_SKIP_UNPROBED = 3,
} FedsecVerdict;

/**
 * Opaque selection state for one stream of candidates.
 */
typedef struct FedsecSelection FedsecSelection;

/**
 * Supplies the probe accuracy of the candidate at `arrival_index` through
 * `out`; returns 0 on success.
 */
typedef int32_t (*FedsecProbeFn)(void *user_data, size_t arrival_index, double *out);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the calling thread's last error, or null if none.
 * The string is owned by the caller; release it with
 * [`fedsec_string_free`].
 */
char *fedsec_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void fedsec_string_free(char *s);

/**
 * Optimal observation threshold `α*` for `n` candidates and ranks
 * `r1..=r2`. A nonzero `paper_table_variant` uses the division form.
 *
 * # Safety
 * `out` must be valid for a write.
 */
int32_t fedsec_alpha_star(uint64_t n,
                          uint32_t r1,
                          uint32_t r2,
                          int32_t paper_table_variant,
                          double *out);

/**
 * Success probability of the threshold rule at real-valued `alpha`.
 *
 * # Safety
 * `out` must be valid for a write.
 */
int32_t fedsec_selection_probability(uint64_t n,
                                     double alpha,
                                     uint32_t r1,
                                     uint32_t r2,
                                     double *out);

/**
 * Monte Carlo estimate of the threshold rule's success rate.
 *
 * # Safety
 * `p_hat` and `std_err` must be valid for writes.
 */
int32_t fedsec_monte_carlo(size_t n,
                           size_t budget,
                           size_t alpha_index,
                           uint64_t trials,
                           uint64_t seed,
                           double *p_hat,
                           double *std_err);

/**
 * Create selection state for `n` candidates and budget `budget`, with the
 * threshold optimized for ranks `r1..=r2`.
 *
 * # Safety
 * `out` must be valid for a write; on success it receives a handle to be
 * released with [`fedsec_selection_free`].
 */
int32_t fedsec_selection_new(size_t n,
                             size_t budget,
                             uint32_t r1,
                             uint32_t r2,
                             struct FedsecSelection **out);

/**
 * # Safety
 * `handle` must be null or a live handle from [`fedsec_selection_new`].
 */
void fedsec_selection_free(struct FedsecSelection *handle);

/**
 * Number of candidates observed and rejected before acceptance starts;
 * 0 for a null handle.
 *
 * # Safety
 * `handle` must be null or a live handle.
 */
size_t fedsec_selection_alpha_index(const struct FedsecSelection *handle);

/**
 * Number of candidates selected so far; 0 for a null handle.
 *
 * # Safety
 * `handle` must be null or a live handle.
 */
size_t fedsec_selection_count(const struct FedsecSelection *handle);

/**
 * Feed the next candidate with a known probe accuracy.
 *
 * # Safety
 * `handle` must be a live handle and `verdict` valid for a write.
 */
int32_t fedsec_selection_observe(struct FedsecSelection *handle,
                                 size_t arrival_index,
                                 double accuracy,
                                 enum FedsecVerdict *verdict);

/**
 * Feed the next candidate, calling `probe` only if the decision needs its
 * accuracy. `*probed` is set to 1 if `probe` was called, else 0.
 *
 * # Safety
 * `handle` must be a live handle, `verdict` and `probed` valid for writes,
 * and `probe` safe to call with `user_data`.
 */
int32_t fedsec_selection_observe_lazy(struct FedsecSelection *handle,
                                      size_t arrival_index,
                                      FedsecProbeFn probe,
                                      void *user_data,
                                      enum FedsecVerdict *verdict,
                                      int32_t *probed);

/**
 * Copy the arrival indices of the selected candidates, in acceptance
 * order, into `buf` (capacity `cap`). `*len` receives the count; if it
 * exceeds `cap`, nothing is copied and [`FEDSEC_ERR_BUFFER`] is returned.
 *
 * # Safety
 * `handle` must be a live handle, `buf` valid for `cap` writes (or null
 * when `cap` is 0) and `len` valid for a write.
 */
int32_t fedsec_selection_selected(const struct FedsecSelection *handle,
                                  size_t *buf,
                                  size_t cap,
                                  size_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEDSEC_H */
