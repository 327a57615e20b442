#ifndef ARGMINE_H
#define ARGMINE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. Codes 2-4 match the CLI exit codes.
 */
typedef enum ArgmineStatus {
  ARGMINE_STATUS_OK = 0,
  /**
   * A required pointer argument was null or a string was not UTF-8.
   */
  ARGMINE_STATUS_INVALID_ARGUMENT = 1,
  ARGMINE_STATUS_CONFIG = 2,
  ARGMINE_STATUS_DATA = 3,
  ARGMINE_STATUS_NUMERIC = 4,
  /**
   * The output buffer is shorter than the data to copy.
   */
  ARGMINE_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * The library panicked; the handle involved should not be reused.
   */
  ARGMINE_STATUS_PANIC = 6,
} ArgmineStatus;

typedef struct ArgmineAssignment ArgmineAssignment;

typedef struct ArgmineCorpus ArgmineCorpus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string.
 */
const char *argmine_version(void);

/**
 * Message of the last failure on this thread, or null if none.
 */
const char *argmine_last_error(void);

/**
 * Loads a corpus JSONL file into `*out`.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is a valid pointer.
 */
enum ArgmineStatus argmine_corpus_load(const char *path, struct ArgmineCorpus **out);

/**
 * Number of documents; 0 for a null handle.
 *
 * # Safety
 * `corpus` is null or a live handle.
 */
size_t argmine_corpus_len(const struct ArgmineCorpus *corpus);

/**
 * # Safety
 * `corpus` is null or a handle not yet freed.
 */
void argmine_corpus_free(struct ArgmineCorpus *corpus);

/**
 * Clusters the documents of `corpus` into topics.
 *
 * `config_json` is a topic configuration object as in the `topics` section
 * of a pipeline config, or null for the defaults.
 *
 * # Safety
 * `corpus` is a live handle; `config_json` is null or a NUL-terminated
 * string; `out` is a valid pointer.
 */
enum ArgmineStatus argmine_topics_cluster(const struct ArgmineCorpus *corpus,
                                          const char *config_json,
                                          uint64_t seed,
                                          struct ArgmineAssignment **out);

/**
 * # Safety
 * `a` is null or a live handle.
 */
size_t argmine_assignment_len(const struct ArgmineAssignment *a);

/**
 * Number of non-noise clusters.
 *
 * # Safety
 * `a` is null or a live handle.
 */
size_t argmine_assignment_n_clusters(const struct ArgmineAssignment *a);

/**
 * Copies the per-document labels (`-1` = noise) into `buf`.
 *
 * # Safety
 * `a` is a live handle; `buf` points to `cap` writable `int64_t`.
 */
enum ArgmineStatus argmine_assignment_labels(const struct ArgmineAssignment *a,
                                             int64_t *buf,
                                             size_t cap);

/**
 * Clustering scores against the gold topics as a JSON object. The string
 * is owned by the handle.
 *
 * # Safety
 * `a` is null or a live handle.
 */
const char *argmine_assignment_report(const struct ArgmineAssignment *a);

/**
 * # Safety
 * `a` is null or a handle not yet freed.
 */
void argmine_assignment_free(struct ArgmineAssignment *a);

/**
 * Adjusted Rand index of two labelings of `n` items.
 *
 * # Safety
 * `truth` and `pred` point to `n` readable `int64_t`; `out` is valid.
 */
enum ArgmineStatus argmine_adjusted_rand_index(const int64_t *truth,
                                               const int64_t *pred,
                                               size_t n,
                                               double *out);

/**
 * Runs the stages listed in a pipeline config file and writes their outputs.
 *
 * # Safety
 * `config_path` is a NUL-terminated string.
 */
enum ArgmineStatus argmine_pipeline_run(const char *config_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ARGMINE_H */
