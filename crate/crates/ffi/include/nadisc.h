#ifndef NADISC_H
#define NADISC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum NadiscStatus {
  NADISC_STATUS_OK = 0,
  NADISC_STATUS_NULL_POINTER = 1,
  NADISC_STATUS_INVALID_INPUT = 2,
  NADISC_STATUS_CAPACITY = 3,
  NADISC_STATUS_INVARIANT = 4,
  NADISC_STATUS_PARSE = 5,
  NADISC_STATUS_IO = 6,
  NADISC_STATUS_PANIC = 7,
} NadiscStatus;

/**
 * A list of valuation oracles over a common item set.
 */
typedef struct NadiscInstance NadiscInstance;

/**
 * Result of a fractional split.
 */
typedef struct NadiscSplit NadiscSplit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a success.
 * Valid until the next call into the library from the same thread.
 */
const char *nadisc_last_error(void);

/**
 * Static, NUL-terminated library version.
 */
const char *nadisc_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void nadisc_string_free(char *s);

/**
 * Seeded random instance of `n` agents over `m` items. `family` is one of
 * `additive-uniform`, `additive-signed`, `coverage`, `table-random-lipschitz`.
 *
 * # Safety
 * `family` must be a NUL-terminated string; `out_instance` must be writable.
 */
enum NadiscStatus nadisc_instance_random(const char *family,
                                         size_t n,
                                         size_t m,
                                         uint64_t seed,
                                         struct NadiscInstance **out_instance);

/**
 * Parses an instance document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out_instance` must be writable.
 */
enum NadiscStatus nadisc_instance_from_json(const char *json, struct NadiscInstance **out_instance);

/**
 * Serializes an instance document. Free the result with `nadisc_string_free`.
 *
 * # Safety
 * `instance` must be a live handle; `out_json` must be writable.
 */
enum NadiscStatus nadisc_instance_to_json(const struct NadiscInstance *instance, char **out_json);

/**
 * # Safety
 * `instance` must be NULL or a live handle, not used afterwards.
 */
void nadisc_instance_free(struct NadiscInstance *instance);

/**
 * # Safety
 * `instance` must be a live handle; out pointers must be writable.
 */
enum NadiscStatus nadisc_instance_shape(const struct NadiscInstance *instance,
                                        size_t *out_agents,
                                        size_t *out_items);

/**
 * `v_agent(S)` where bit `j` of `items` marks item `j`.
 *
 * # Safety
 * `instance` must be a live handle; `out_value` must be writable.
 */
enum NadiscStatus nadisc_eval(const struct NadiscInstance *instance,
                              size_t agent,
                              uint64_t items,
                              double *out_value);

/**
 * Necklace split into `k` colors over the identity layout. `restarts == 0`
 * keeps the default restart count.
 *
 * # Safety
 * `instance` must be a live handle; `out_split` must be writable.
 */
enum NadiscStatus nadisc_split(const struct NadiscInstance *instance,
                               size_t k,
                               uint64_t seed,
                               size_t restarts,
                               struct NadiscSplit **out_split);

/**
 * # Safety
 * `split` must be a live handle; out pointers must be writable.
 */
enum NadiscStatus nadisc_split_summary(const struct NadiscSplit *split,
                                       double *out_imbalance,
                                       bool *out_converged,
                                       size_t *out_max_fractional);

/**
 * Full split report as JSON. Free the result with `nadisc_string_free`.
 *
 * # Safety
 * `split` must be a live handle; `out_json` must be writable.
 */
enum NadiscStatus nadisc_split_to_json(const struct NadiscSplit *split, char **out_json);

/**
 * # Safety
 * `split` must be NULL or a live handle, not used afterwards.
 */
void nadisc_split_free(struct NadiscSplit *split);

/**
 * Best of `trials` independent roundings of the split. Writes one color per
 * item into `out_colors` (length `len`, equal to the item count).
 *
 * # Safety
 * Handles must be live; `out_colors` must hold `len` entries.
 */
enum NadiscStatus nadisc_round(const struct NadiscInstance *instance,
                               const struct NadiscSplit *split,
                               size_t trials,
                               uint64_t seed,
                               size_t *out_colors,
                               size_t len,
                               double *out_disc);

/**
 * Discrepancy of an integral `k`-coloring.
 *
 * # Safety
 * `instance` must be a live handle; `colors` must hold `len` entries.
 */
enum NadiscStatus nadisc_disc_of_coloring(const struct NadiscInstance *instance,
                                          const size_t *colors,
                                          size_t len,
                                          size_t k,
                                          double *out_disc);

/**
 * Envy-free allocation with subsidies from an `n`-coloring. Writes the
 * reassigned bundle index of each item into `out_owner` (length `len`) and
 * one payment per agent into `out_payments` (length `n`).
 *
 * # Safety
 * `instance` must be a live handle; buffers must hold the stated lengths.
 */
enum NadiscStatus nadisc_subsidy(const struct NadiscInstance *instance,
                                 const size_t *colors,
                                 size_t len,
                                 size_t *out_owner,
                                 double *out_payments,
                                 size_t n,
                                 double *out_total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NADISC_H */
