#ifndef GBDP_H
#define GBDP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GbdpStatus {
  GBDP_STATUS_OK = 0,
  GBDP_STATUS_NULL_POINTER = 1,
  GBDP_STATUS_INVALID_UTF8 = 2,
  GBDP_STATUS_SHAPE = 3,
  GBDP_STATUS_DOMAIN = 4,
  GBDP_STATUS_UNSUPPORTED = 5,
  GBDP_STATUS_POSITIVITY = 6,
  GBDP_STATUS_CONSISTENCY = 7,
  GBDP_STATUS_STRUCTURE = 8,
  GBDP_STATUS_CONVERGENCE = 9,
  GBDP_STATUS_PARSE = 10,
  GBDP_STATUS_BUFFER_TOO_SMALL = 11,
  GBDP_STATUS_PANIC = 12,
} GbdpStatus;

/**
 * Transition model with explicit probabilities.
 */
typedef struct GbdpModel GbdpModel;

/**
 * Vertex/edge parametrization of a commuting model.
 */
typedef struct GbdpParams GbdpParams;

/**
 * Orders and exact ranks of the constraint matrix Q and parameter matrix R.
 */
typedef struct GbdpRanks {
  size_t q_rows;
  size_t q_cols;
  size_t r_rows;
  size_t r_cols;
  size_t rank_q;
  size_t rank_r;
  int64_t rank_formula_q;
  int64_t rank_formula_r;
  /**
   * 1 when Q Rᵀ = 0.
   */
  uint8_t orthogonal;
  /**
   * 1 when rank Q + rank R equals the column count.
   */
  uint8_t complementary;
} GbdpRanks;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none.
 *
 * The pointer stays valid until the next failing call on this thread.
 */
const char *gbdp_last_error(void);

/**
 * Parse a parameter document (TOML).
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum GbdpStatus gbdp_params_parse(const char *toml, struct GbdpParams **out);

/**
 * Every Γ equal to `gamma`, every α equal to 1, on a grid with `q`
 * dimensions `dims[0..q]` and jump bound `l` in both directions.
 *
 * # Safety
 * `dims` must point to `q` values; `out` must be writable.
 */
enum GbdpStatus gbdp_params_uniform(const size_t *dims,
                                    size_t q,
                                    size_t l,
                                    double gamma,
                                    struct GbdpParams **out);

/**
 * # Safety
 * `p` must come from this library and not be used afterwards. Null is ignored.
 */
void gbdp_params_free(struct GbdpParams *p);

/**
 * Number of grid states, 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t gbdp_params_num_states(const struct GbdpParams *p);

/**
 * Perron-scale `p` so the full matrix plus `self_prob·I` is stochastic.
 *
 * # Safety
 * `p` must be a live handle; `out` must be writable; `rho` may be null.
 */
enum GbdpStatus gbdp_params_normalize(const struct GbdpParams *p,
                                      double self_prob,
                                      struct GbdpParams **out,
                                      double *rho);

/**
 * Spectral `k`-step matrix of the model built from `p` with scalar
 * self-transition probability `self_prob`.
 *
 * # Safety
 * `p` must be a live handle; `out` must hold `len` doubles.
 */
enum GbdpStatus gbdp_params_kstep(const struct GbdpParams *p,
                                  double self_prob,
                                  uint32_t k,
                                  double *out,
                                  size_t len);

/**
 * # Safety
 * `p` must be a live handle; `out` must be writable.
 */
enum GbdpStatus gbdp_params_to_model(const struct GbdpParams *p, struct GbdpModel **out);

/**
 * Parse a model document (TOML).
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum GbdpStatus gbdp_model_parse(const char *toml, struct GbdpModel **out);

/**
 * # Safety
 * `m` must come from this library and not be used afterwards. Null is ignored.
 */
void gbdp_model_free(struct GbdpModel *m);

/**
 * Number of grid states, 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t gbdp_model_num_states(const struct GbdpModel *m);

/**
 * One-step matrix including self-transitions.
 *
 * # Safety
 * `m` must be a live handle; `out` must hold `len` doubles.
 */
enum GbdpStatus gbdp_model_full_matrix(const struct GbdpModel *m, double *out, size_t len);

/**
 * `k`-th power of the one-step matrix by repeated squaring.
 *
 * # Safety
 * `m` must be a live handle; `out` must hold `len` doubles.
 */
enum GbdpStatus gbdp_model_matrix_power(const struct GbdpModel *m,
                                        uint32_t k,
                                        double *out,
                                        size_t len);

/**
 * Largest absolute entry over all pairwise commutators of the directional matrices.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum GbdpStatus gbdp_model_max_commutator(const struct GbdpModel *m, double *out);

/**
 * Exact orders and ranks of Q and R for `dims[0..q]` and jump bound `l`.
 *
 * # Safety
 * `dims` must point to `q` values; `out` must be writable.
 */
enum GbdpStatus gbdp_ranks(const size_t *dims, size_t q, size_t l, struct GbdpRanks *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GBDP_H */
