#ifndef NDAR_H
#define NDAR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum NdarBackend {
  NDAR_BACKEND_NOISELESS = 0,
  NDAR_BACKEND_TRAJECTORIES = 1,
  NDAR_BACKEND_DENSITY = 2,
} NdarBackend;

typedef enum NdarStatus {
  NDAR_STATUS_OK = 0,
  NDAR_STATUS_NULL_POINTER = 1,
  NDAR_STATUS_INVALID_ARGUMENT = 2,
  NDAR_STATUS_PARSE = 3,
  NDAR_STATUS_CAPACITY = 4,
  NDAR_STATUS_CONFIG = 5,
  NDAR_STATUS_INVARIANT = 6,
  NDAR_STATUS_IO = 7,
  NDAR_STATUS_PANIC = 8,
} NdarStatus;

/**
 * An Ising Hamiltonian.
 */
typedef struct NdarHamiltonian NdarHamiltonian;

/**
 * The trace of a finished run.
 */
typedef struct NdarResult NdarResult;

/**
 * Parameters of one adaptive remapping run.
 */
typedef struct NdarRunConfig {
  size_t trials_per_iter;
  size_t shots_per_trial;
  size_t max_iters;
  /**
   * QAOA depth.
   */
  size_t p;
  size_t orderings_per_iter;
  double gamma_1q;
  double gamma_2q;
  enum NdarBackend backend;
  uint64_t seed;
  double epsilon;
  /**
   * Also stop when an iteration fails to improve the best energy.
   */
  bool stop_on_no_improvement;
} NdarRunConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *ndar_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string returned by this library that was not freed yet.
 */
void ndar_string_free(char *s);

/**
 * Random Sherrington-Kirkpatrick instance with `+-1` couplings.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum NdarStatus ndar_hamiltonian_generate_sk(size_t n, uint64_t seed, struct NdarHamiltonian **out);

/**
 * Parses an instance in the text format.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` valid for a pointer write.
 */
enum NdarStatus ndar_hamiltonian_parse(const char *text, struct NdarHamiltonian **out);

/**
 * Serializes to the text format; free the result with [`ndar_string_free`].
 *
 * # Safety
 * `h` must be a live handle and `out` valid for a pointer write.
 */
enum NdarStatus ndar_hamiltonian_serialize(const struct NdarHamiltonian *h, char **out);

/**
 * Number of qubits, or 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t ndar_hamiltonian_num_qubits(const struct NdarHamiltonian *h);

/**
 * Energy of the bitstring `bits[0..len]`, one byte per bit.
 *
 * # Safety
 * `h` must be a live handle, `bits` readable for `len` bytes and `out` writable.
 */
enum NdarStatus ndar_hamiltonian_energy(const struct NdarHamiltonian *h,
                                        const uint8_t *bits,
                                        size_t len,
                                        double *out);

/**
 * Gauge-transformed copy of `h` by the flip mask `mask[0..len]`.
 *
 * # Safety
 * `h` must be a live handle, `mask` readable for `len` bytes and `out` writable.
 */
enum NdarStatus ndar_hamiltonian_gauge_transform(const struct NdarHamiltonian *h,
                                                 const uint8_t *mask,
                                                 size_t len,
                                                 struct NdarHamiltonian **out);

/**
 * # Safety
 * `h` must be null or a live handle, which is invalid afterwards.
 */
void ndar_hamiltonian_free(struct NdarHamiltonian *h);

/**
 * Exhaustive ground state: energy and the lowest-index minimizer.
 *
 * # Safety
 * `h` must be a live handle, `energy` writable and `bits` writable for `len` bytes.
 */
enum NdarStatus ndar_brute_force(const struct NdarHamiltonian *h,
                                 double *energy,
                                 uint8_t *bits,
                                 size_t len);

/**
 * Defaults: 20 trials of 100 shots, 5 iterations, depth 1, strong damping
 * on the trajectory backend.
 */
struct NdarRunConfig ndar_run_config_default(void);

/**
 * Runs adaptive remapping on `h` with the all-zeros attractor.
 *
 * `ground_energy` is used for approximation ratios; pass NaN if unknown.
 *
 * # Safety
 * `h` and `cfg` must be valid pointers and `out` writable.
 */
enum NdarStatus ndar_run(const struct NdarHamiltonian *h,
                         const struct NdarRunConfig *cfg,
                         double ground_energy,
                         struct NdarResult **out);

/**
 * Number of completed iterations, or 0 for a null handle.
 *
 * # Safety
 * `r` must be null or a live handle.
 */
size_t ndar_result_iterations(const struct NdarResult *r);

/**
 * Best energy found and its bitstring in the original frame.
 *
 * # Safety
 * `r` must be a live handle, `energy` writable and `bits` writable for `len` bytes.
 */
enum NdarStatus ndar_result_best(const struct NdarResult *r,
                                 double *energy,
                                 uint8_t *bits,
                                 size_t len);

/**
 * Energy of the attractor state under the Hamiltonian optimized in `iteration`.
 *
 * # Safety
 * `r` must be a live handle and `out` writable.
 */
enum NdarStatus ndar_result_attractor_energy(const struct NdarResult *r,
                                             size_t iteration,
                                             double *out);

/**
 * Samples drawn up to and including `iteration`.
 *
 * # Safety
 * `r` must be a live handle and `out` writable.
 */
enum NdarStatus ndar_result_samples_consumed(const struct NdarResult *r,
                                             size_t iteration,
                                             size_t *out);

/**
 * Full trace as JSON; free the result with [`ndar_string_free`].
 *
 * # Safety
 * `r` must be a live handle and `out` writable.
 */
enum NdarStatus ndar_result_to_json(const struct NdarResult *r, char **out);

/**
 * # Safety
 * `r` must be null or a live handle, which is invalid afterwards.
 */
void ndar_result_free(struct NdarResult *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NDAR_H */
