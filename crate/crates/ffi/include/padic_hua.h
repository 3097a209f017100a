#ifndef PADIC_HUA_H
#define PADIC_HUA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum PhStatus {
  PH_STATUS_OK = 0,
  PH_STATUS_NULL_POINTER = 1,
  PH_STATUS_INVALID_ARGUMENT = 2,
  PH_STATUS_PRECISION_EXHAUSTED = 3,
  PH_STATUS_BELOW_PRECISION = 4,
  PH_STATUS_SIZE_GUARD = 5,
  PH_STATUS_INVALID_UTF8 = 6,
  PH_STATUS_BUFFER_TOO_SMALL = 7,
  PH_STATUS_PANIC = 8,
} PhStatus;

/**
 * Hua parameters `(p, t)`.
 */
typedef struct PhHuaParams PhHuaParams;

/**
 * Sampler for singular numbers of `M_N^(s)`.
 */
typedef struct PhHuaSampler PhHuaSampler;

/**
 * A matrix over `Q_p` at finite precision.
 */
typedef struct PhMatrix PhMatrix;

/**
 * Sampler for `nu^(s)`.
 */
typedef struct PhNuSampler PhNuSampler;

/**
 * A seeded random stream.
 */
typedef struct PhRng PhRng;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The library version as a static string; do not free.
 */
const char *ph_version(void);

/**
 * Copy of the calling thread's last error message, or null if none.
 * Release with `ph_string_free`.
 */
char *ph_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void ph_string_free(char *s);

/**
 * Parameters with `t` given as an exact fraction string such as `"1/2"`.
 *
 * # Safety
 * `t` must be a nul-terminated string and `out` a valid pointer.
 */
enum PhStatus ph_hua_params_new(uint64_t p, const char *t, struct PhHuaParams **out);

/**
 * # Safety
 * `h` must be null or a handle from `ph_hua_params_new`, freed once.
 */
void ph_hua_params_free(struct PhHuaParams *h);

/**
 * `m_N^(s)(k)` for a non-increasing tuple of length `n`, as `"num/den"`.
 *
 * # Safety
 * `k` must point to `n` integers; `out` must be valid.
 */
enum PhStatus ph_law_m_n(const struct PhHuaParams *params, const int64_t *k, size_t n, char **out);

/**
 * Bracket `[lower, upper]` of `pi^(s)(x)` of width at most `eps` (a
 * fraction or decimal string), endpoints as `"num/den"`.
 *
 * # Safety
 * `eps` must be a nul-terminated string; `lower` and `upper` valid.
 */
enum PhStatus ph_law_pi_s(const struct PhHuaParams *params,
                          uint64_t x,
                          const char *eps,
                          char **lower,
                          char **upper);

/**
 * Bracket of `nu^(s)(lambda)` for `len` non-increasing positive parts.
 *
 * # Safety
 * `parts` must point to `len` integers; `eps` nul-terminated; outputs valid.
 */
enum PhStatus ph_law_nu(const struct PhHuaParams *params,
                        const uint64_t *parts,
                        size_t len,
                        const char *eps,
                        char **lower,
                        char **upper);

/**
 * Stream `stream` of the generator seeded with `seed`.
 *
 * # Safety
 * `out` must be valid.
 */
enum PhStatus ph_rng_new(uint64_t seed, uint64_t stream, struct PhRng **out);

/**
 * # Safety
 * `h` must be null or a handle from `ph_rng_new`, freed once.
 */
void ph_rng_free(struct PhRng *h);

/**
 * # Safety
 * `params` must be a live handle; `out` valid.
 */
enum PhStatus ph_hua_sampler_new(const struct PhHuaParams *params,
                                 uint64_t n,
                                 struct PhHuaSampler **out);

/**
 * # Safety
 * `h` must be null or a handle from `ph_hua_sampler_new`, freed once.
 */
void ph_hua_sampler_free(struct PhHuaSampler *h);

/**
 * Writes `N` singular numbers `k_1 >= ... >= k_N` of one draw.
 *
 * # Safety
 * Handles must be live; `out` must have room for `cap` integers.
 */
enum PhStatus ph_hua_sample_singulars(const struct PhHuaSampler *sampler,
                                      struct PhRng *rng,
                                      int64_t *out,
                                      size_t cap);

/**
 * One matrix from `M_N^(s)` at `digits` digits with `guard` guard digits.
 *
 * # Safety
 * Handles must be live; `out` valid.
 */
enum PhStatus ph_hua_sample_matrix(const struct PhHuaSampler *sampler,
                                   struct PhRng *rng,
                                   uint32_t digits,
                                   uint32_t guard_digits,
                                   struct PhMatrix **out);

/**
 * # Safety
 * `params` must be a live handle; `out` valid.
 */
enum PhStatus ph_nu_sampler_new(const struct PhHuaParams *params, struct PhNuSampler **out);

/**
 * # Safety
 * `h` must be null or a handle from `ph_nu_sampler_new`, freed once.
 */
void ph_nu_sampler_free(struct PhNuSampler *h);

/**
 * Draws a partition; its parts go to `out` and their count to `len`.
 * With too little room the status is `BufferTooSmall`, `len` holds the
 * required size and the draw is lost.
 *
 * # Safety
 * Handles must be live; `out` must have room for `cap` integers.
 */
enum PhStatus ph_nu_sample(const struct PhNuSampler *sampler,
                           struct PhRng *rng,
                           uint64_t *out,
                           size_t cap,
                           size_t *len);

/**
 * Parses the matrix text format (rows of `a*p^v` entries).
 *
 * # Safety
 * `text` must be nul-terminated; `out` valid.
 */
enum PhStatus ph_matrix_parse(const char *text,
                              uint64_t p,
                              uint32_t digits,
                              uint32_t guard_digits,
                              struct PhMatrix **out);

/**
 * # Safety
 * `h` must be null or a matrix handle from this library, freed once.
 */
void ph_matrix_free(struct PhMatrix *h);

/**
 * Matrix size `N`, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t ph_matrix_size(const struct PhMatrix *m);

/**
 * The matrix in the text format accepted by `ph_matrix_parse`.
 *
 * # Safety
 * `m` must be live; `out` valid.
 */
enum PhStatus ph_matrix_to_string(const struct PhMatrix *m, char **out);

/**
 * Singular numbers into `values`; `certified[i]` is 1 when `values[i]` is
 * exact and 0 when it is only an upper bound (the precision floor).
 *
 * # Safety
 * `m` must be live; `values` and `certified` need room for `cap` items.
 */
enum PhStatus ph_matrix_singular_numbers(const struct PhMatrix *m,
                                         int64_t *values,
                                         uint8_t *certified,
                                         size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PADIC_HUA_H */
