#ifndef DFLSIM_H
#define DFLSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DflStatus {
  DFL_STATUS_OK = 0,
  DFL_STATUS_NULL_POINTER = 1,
  DFL_STATUS_INVALID_ARGUMENT = 2,
  DFL_STATUS_BUFFER_TOO_SMALL = 3,
  DFL_STATUS_GRAPH = 4,
  DFL_STATUS_SPECTRAL = 5,
  DFL_STATUS_DIFFUSION = 6,
  DFL_STATUS_NEURAL = 7,
  DFL_STATUS_FEDERATION = 8,
  DFL_STATUS_PANIC = 9,
} DflStatus;

/**
 * Opaque network handle.
 */
typedef struct DflGraph DflGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` as a
 * NUL-terminated string, truncating if needed. Returns the full message
 * length in bytes (excluding the terminator).
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t dfl_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dfl_version(void);

/**
 * Generates a network. `model` is a TOML table such as
 * `family = "k_regular"\nk = 8` or `family = "cycle"`.
 *
 * # Safety
 * `model` must be a NUL-terminated string and `out` valid for one write.
 */
enum DflStatus dfl_graph_generate(const char *model,
                                  size_t n,
                                  uint64_t seed,
                                  struct DflGraph **out);

/**
 * Builds a network from `num_edges` pairs stored flat in `edges`
 * (`u0, v0, u1, v1, …`).
 *
 * # Safety
 * `edges` must be valid for `2 * num_edges` reads (or null when
 * `num_edges` is 0) and `out` valid for one write.
 */
enum DflStatus dfl_graph_from_edges(size_t n,
                                    const size_t *edges,
                                    size_t num_edges,
                                    struct DflGraph **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `g` must come from this library and not be used afterwards.
 */
void dfl_graph_free(struct DflGraph *g);

/**
 * # Safety
 * `g` must be a live handle; `nodes` and `edges` valid for one write each.
 */
enum DflStatus dfl_graph_size(const struct DflGraph *g, size_t *nodes, size_t *edges);

/**
 * Writes the degree of every node; `len` must be at least the node count.
 *
 * # Safety
 * `g` must be a live handle and `out` valid for `len` writes.
 */
enum DflStatus dfl_graph_degrees(const struct DflGraph *g, size_t *out, size_t len);

/**
 * # Safety
 * `g` must be a live handle and `out` valid for one write.
 */
enum DflStatus dfl_graph_is_connected(const struct DflGraph *g, bool *out);

/**
 * Stationary vector of the self-inclusive averaging operator. `pi` may be
 * null when only the norm is wanted; otherwise it needs room for every node.
 *
 * # Safety
 * `g` must be a live handle, `pi` null or valid for `len` writes and `norm`
 * valid for one write.
 */
enum DflStatus dfl_steady_state(const struct DflGraph *g, double *pi, size_t len, double *norm);

/**
 * Second-largest eigenvalue modulus of the averaging operator.
 *
 * # Safety
 * `g` must be a live handle and `out` valid for one write.
 */
enum DflStatus dfl_second_eigenvalue(const struct DflGraph *g, double *out);

/**
 * Compression-factor estimate from a degree sample and a size estimate.
 *
 * # Safety
 * `degrees` must be valid for `len` reads and `out` for one write.
 */
enum DflStatus dfl_vsteady_norm_from_degrees(const size_t *degrees,
                                             size_t len,
                                             double n_estimate,
                                             double *out);

/**
 * He standard deviation for a layer; `activation` is e.g. `"relu"`,
 * `"tanh"`, `"linear"` or `"leaky_relu:0.01"`.
 *
 * # Safety
 * `activation` must be a NUL-terminated string and `out` valid for one write.
 */
enum DflStatus dfl_he_sigma(size_t fan_in, const char *activation, double *out);

/**
 * Runs the diffusion model and writes `rounds + 1` values of each spread
 * measure (index 0 is the initial state).
 *
 * # Safety
 * `g` must be a live handle; `sigma_ap` and `sigma_an` valid for `len`
 * writes.
 */
enum DflStatus dfl_diffusion_run(const struct DflGraph *g,
                                 size_t params,
                                 double sigma_init,
                                 double sigma_noise,
                                 size_t rounds,
                                 uint64_t seed,
                                 double *sigma_ap,
                                 double *sigma_an,
                                 size_t len);

/**
 * Per-node network-size estimates by extrema propagation.
 *
 * # Safety
 * `g` must be a live handle and `out` valid for `len` writes.
 */
enum DflStatus dfl_estimate_size(const struct DflGraph *g,
                                 size_t samples,
                                 size_t rounds,
                                 uint64_t seed,
                                 double *out,
                                 size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DFLSIM_H */
