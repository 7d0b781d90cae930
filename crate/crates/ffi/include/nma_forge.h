#ifndef NMA_FORGE_H
#define NMA_FORGE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum NmaStatus {
  NMA_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  NMA_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  NMA_STATUS_INVALID_UTF8 = 2,
  /**
   * Rejected network, parameters, configuration or index.
   */
  NMA_STATUS_INVALID_INPUT = 3,
  /**
   * File system failure.
   */
  NMA_STATUS_IO = 4,
  /**
   * A chain failed its acceptance-rate check or another statistical
   * failure occurred.
   */
  NMA_STATUS_STATISTICAL = 5,
  /**
   * The library panicked; this is a bug.
   */
  NMA_STATUS_PANIC = 6,
} NmaStatus;

/**
 * A finished experiment with its per-replication results and aggregate.
 */
typedef struct NmaExperiment NmaExperiment;

/**
 * An evidence network.
 */
typedef struct NmaNetwork NmaNetwork;

/**
 * Candidate trial additions ranked by resulting irregularity.
 */
typedef struct NmaPlanList NmaPlanList;

/**
 * Network-level summary of a finished experiment.
 */
typedef struct NmaTotals {
  size_t n_trials;
  double normalised_irregularity;
  double sd_bar;
  double abs_dp_bar;
  double abs_dp_bar_norm;
  double abs_dsucra_bar;
  double abs_dsucra_bar_norm;
  double abs_dd_bar;
  double mean_tau;
  double sd_tau;
} NmaTotals;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy of the last error message on this thread, or null if none.
 * Release with [`nma_string_free`].
 */
char *nma_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void nma_string_free(char *s);

/**
 * Library version as a static string.
 */
const char *nma_version(void);

/**
 * Parses a network description (JSON, trials or `K` shorthand).
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum NmaStatus nma_network_from_json(const char *json, struct NmaNetwork **out);

/**
 * Builds a two-arm network from trial counts per treatment pair, listed
 * in the order (1,2), (1,3), ..., (N-1,N).
 *
 * # Safety
 * `counts` must point to `len` values; `out` must be writable.
 */
enum NmaStatus nma_network_from_pair_counts(size_t n_treatments,
                                            const uint32_t *counts,
                                            size_t len,
                                            uint32_t n_per_arm,
                                            struct NmaNetwork **out);

/**
 * # Safety
 * `net` must be null or a live handle from this library.
 */
void nma_network_free(struct NmaNetwork *net);

/**
 * # Safety
 * `net` must be a live handle; `out` must be writable.
 */
enum NmaStatus nma_network_n_trials(const struct NmaNetwork *net, size_t *out);

/**
 * Degree irregularity divided by the squared mean degree.
 *
 * # Safety
 * `net` must be a live handle; `out` must be writable.
 */
enum NmaStatus nma_network_irregularity(const struct NmaNetwork *net, double *out);

/**
 * Full geometry summary as JSON.
 *
 * # Safety
 * `net` must be a live handle; `out` must be writable.
 */
enum NmaStatus nma_network_geometry_json(const struct NmaNetwork *net, char **out);

/**
 * Enumerates ways of adding `budget` two-arm trials, best first. With
 * `any_split` false all trials go to one comparison.
 *
 * # Safety
 * `net` must be a live handle; `out` must be writable.
 */
enum NmaStatus nma_plan_enumerate(const struct NmaNetwork *net,
                                  uint32_t budget,
                                  bool any_split,
                                  struct NmaPlanList **out);

/**
 * # Safety
 * `list` must be null or a live handle from this library.
 */
void nma_plan_list_free(struct NmaPlanList *list);

/**
 * Number of candidates, or 0 for a null handle.
 *
 * # Safety
 * `list` must be null or a live handle.
 */
size_t nma_plan_list_len(const struct NmaPlanList *list);

/**
 * Label of one candidate, such as `T1-T4 x10`.
 *
 * # Safety
 * `list` must be a live handle; `out` must be writable.
 */
enum NmaStatus nma_plan_list_label(const struct NmaPlanList *list, size_t index, char **out);

/**
 * Irregularity of the network after adding one candidate.
 *
 * # Safety
 * `list` must be a live handle; `out` must be writable.
 */
enum NmaStatus nma_plan_list_irregularity(const struct NmaPlanList *list,
                                          size_t index,
                                          double *out);

/**
 * The ranked candidates as CSV.
 *
 * # Safety
 * `list` must be a live handle; `out` must be writable.
 */
enum NmaStatus nma_plan_list_csv(const struct NmaPlanList *list, char **out);

/**
 * Runs the experiment described by a JSON config. Relative `network_file`
 * paths resolve against `base_dir` (the working directory if null). A
 * non-null `seed` overrides the config's seed.
 *
 * # Safety
 * `config_json` must be a nul-terminated string, `base_dir` null or one,
 * `seed` null or readable, and `out` writable.
 */
enum NmaStatus nma_experiment_run_json(const char *config_json,
                                       const char *base_dir,
                                       const uint64_t *seed,
                                       struct NmaExperiment **out);

/**
 * # Safety
 * `exp` must be null or a live handle from this library.
 */
void nma_experiment_free(struct NmaExperiment *exp);

/**
 * # Safety
 * `exp` must be a live handle; `out` must be writable.
 */
enum NmaStatus nma_experiment_totals(const struct NmaExperiment *exp, struct NmaTotals *out);

/**
 * Per-replication results as CSV, identical to `replications.csv`.
 *
 * # Safety
 * `exp` must be a live handle; `out` must be writable.
 */
enum NmaStatus nma_experiment_replications_csv(const struct NmaExperiment *exp, char **out);

/**
 * Writes the experiment's output files into `dir`, creating it if needed.
 *
 * # Safety
 * `exp` must be a live handle and `dir` a nul-terminated string.
 */
enum NmaStatus nma_experiment_write(const struct NmaExperiment *exp, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NMA_FORGE_H */
