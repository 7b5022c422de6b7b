#ifndef FAIRGE_H
#define FAIRGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum FairgeStatus {
  FAIRGE_STATUS_OK = 0,
  FAIRGE_STATUS_NULL_POINTER = 1,
  FAIRGE_STATUS_INVALID_UTF8 = 2,
  FAIRGE_STATUS_PARSE = 3,
  FAIRGE_STATUS_INVALID_ARGUMENT = 4,
  FAIRGE_STATUS_DIMENSION_MISMATCH = 5,
  FAIRGE_STATUS_NO_CONVERGENCE = 6,
  FAIRGE_STATUS_DIVERGENCE = 7,
  FAIRGE_STATUS_UNDEFINED_METRIC = 8,
  FAIRGE_STATUS_DEGENERATE = 9,
  FAIRGE_STATUS_BUFFER_TOO_SMALL = 10,
  FAIRGE_STATUS_IO = 11,
  FAIRGE_STATUS_OTHER = 12,
  FAIRGE_STATUS_PANIC = 13,
} FairgeStatus;

// Graph plus node attributes, sensitive column and labels.
typedef struct FairgeDataset FairgeDataset;

// Undirected graph handle.
typedef struct FairgeGraph FairgeGraph;

// Outcome of one training run.
typedef struct FairgeReport FairgeReport;

// Leading eigenpairs of a graph's adjacency matrix.
typedef struct FairgeTruncation FairgeTruncation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *fairge_version(void);

// Message of the last failed call on this thread, or null after a success.
// Release with [`fairge_string_free`].
char *fairge_last_error_message(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void fairge_string_free(char *s);

// Builds a graph on `n` nodes from `n_edges` pairs stored flat in `edges`
// (`edges[2k]`, `edges[2k + 1]`).
//
// # Safety
// `edges` must point to `2 * n_edges` values (may be null when `n_edges` is
// 0); `out` must be writable.
enum FairgeStatus fairge_graph_from_edges(size_t n,
                                          const size_t *edges,
                                          size_t n_edges,
                                          struct FairgeGraph **out);

// Node count, or 0 for a null handle.
//
// # Safety
// `graph` must be null or a live handle.
size_t fairge_graph_node_count(const struct FairgeGraph *graph);

// Undirected edge count, or 0 for a null handle.
//
// # Safety
// `graph` must be null or a live handle.
size_t fairge_graph_edge_count(const struct FairgeGraph *graph);

// # Safety
// `graph` must be null or a handle not yet freed.
void fairge_graph_free(struct FairgeGraph *graph);

// Computes the `m` largest-magnitude adjacency eigenpairs.
//
// # Safety
// `graph` must be a live handle; `out` must be writable.
enum FairgeStatus fairge_graph_eigenpairs(const struct FairgeGraph *graph,
                                          size_t m,
                                          double tol,
                                          size_t max_iter,
                                          struct FairgeTruncation **out);

// Number of retained eigenpairs, or 0 for a null handle.
//
// # Safety
// `trunc` must be null or a live handle.
size_t fairge_truncation_len(const struct FairgeTruncation *trunc);

// Copies the eigenvalues (descending magnitude) into `out[0..len]`.
//
// # Safety
// `trunc` must be a live handle; `out` must hold `len` doubles.
enum FairgeStatus fairge_truncation_eigenvalues(const struct FairgeTruncation *trunc,
                                                double *out,
                                                size_t len);

// Copies eigenvector `index` (length n) into `out[0..len]`.
//
// # Safety
// `trunc` must be a live handle; `out` must hold `len` doubles.
enum FairgeStatus fairge_truncation_eigenvector(const struct FairgeTruncation *trunc,
                                                size_t index,
                                                double *out,
                                                size_t len);

// # Safety
// `trunc` must be null or a handle not yet freed.
void fairge_truncation_free(struct FairgeTruncation *trunc);

// Parses an edge list and an attribute CSV (with `sensitive` and `label`
// columns) into a dataset.
//
// # Safety
// Both strings must be NUL-terminated; `out` must be writable.
enum FairgeStatus fairge_dataset_from_text(const char *edge_list,
                                           const char *attributes_csv,
                                           struct FairgeDataset **out);

// Node count, or 0 for a null handle.
//
// # Safety
// `dataset` must be null or a live handle.
size_t fairge_dataset_node_count(const struct FairgeDataset *dataset);

// # Safety
// `dataset` must be null or a handle not yet freed.
void fairge_dataset_free(struct FairgeDataset *dataset);

// Trains and evaluates once. `config_json` is a training config object
// (missing keys take defaults) or null for all defaults.
//
// # Safety
// `dataset` must be a live handle; `name` and non-null `config_json` must be
// NUL-terminated; `out` must be writable.
enum FairgeStatus fairge_train(const struct FairgeDataset *dataset,
                               const char *name,
                               const char *config_json,
                               struct FairgeReport **out);

// Test accuracy as a fraction, or NaN for a null handle.
//
// # Safety
// `report` must be null or a live handle.
double fairge_report_accuracy(const struct FairgeReport *report);

// Statistical parity gap in percent, or NaN for a null handle.
//
// # Safety
// `report` must be null or a live handle.
double fairge_report_delta_sp(const struct FairgeReport *report);

// Equal opportunity gap in percent, or NaN for a null handle.
//
// # Safety
// `report` must be null or a live handle.
double fairge_report_delta_eo(const struct FairgeReport *report);

// The report as JSON, or null for a null handle. Release with
// [`fairge_string_free`].
//
// # Safety
// `report` must be null or a live handle.
char *fairge_report_to_json(const struct FairgeReport *report);

// # Safety
// `report` must be null or a handle not yet freed.
void fairge_report_free(struct FairgeReport *report);

// Alignment check for one variant (`"lemma1"`, `"thm1"`, `"thm2"` or
// `"thm3"`) on the dataset's graph and sensitive column. Writes the final
// cosine and the predicted limit.
//
// # Safety
// `dataset` must be a live handle; `variant` NUL-terminated; `cos_out` and
// `limit_out` writable.
enum FairgeStatus fairge_limit_check(const struct FairgeDataset *dataset,
                                     const char *variant,
                                     size_t k_max,
                                     double *cos_out,
                                     double *limit_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FAIRGE_H */
