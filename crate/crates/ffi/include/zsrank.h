/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef ZSRANK_H
#define ZSRANK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum ZsStatus {
  ZS_STATUS_OK = 0,
  ZS_STATUS_NULL_POINTER = 1,
  ZS_STATUS_INVALID_UTF8 = 2,
  ZS_STATUS_INVALID_ARGUMENT = 3,
  ZS_STATUS_IO = 4,
  ZS_STATUS_PARSE = 5,
  ZS_STATUS_INDEX_FORMAT = 6,
  ZS_STATUS_SCORER = 7,
  ZS_STATUS_OUT_OF_RANGE = 8,
  ZS_STATUS_INTERNAL = 9,
} ZsStatus;

/**
 * Which text of a document an index covers.
 */
typedef enum ZsField {
  ZS_FIELD_FULL_TEXT = 0,
  ZS_FIELD_ABSTRACT = 1,
  ZS_FIELD_PARAGRAPH = 2,
} ZsField;

/**
 * Opaque ranked list returned by a search.
 */
typedef struct ZsHits ZsHits;

/**
 * Opaque BM25 index.
 */
typedef struct ZsIndex ZsIndex;

/**
 * Opaque query lexicon.
 */
typedef struct ZsLexicon ZsLexicon;

/**
 * Opaque relevance judgments.
 */
typedef struct ZsQrels ZsQrels;

/**
 * Opaque run (ranked lists per topic).
 */
typedef struct ZsRun ZsRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * Valid until the next call into the library on the same thread.
 */
const char *zs_last_error(void);

/**
 * Library version as a static string.
 */
const char *zs_version(void);

/**
 * Builds an index over a JSONL corpus with the default analysis
 * (lowercase, English stopwords, Porter stemming).
 *
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum ZsStatus zs_index_build_jsonl(const char *path, enum ZsField field, struct ZsIndex **out);

/**
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum ZsStatus zs_index_load(const char *path, struct ZsIndex **out);

/**
 * # Safety
 * `index` must come from this library; `path` must be a valid C string.
 */
enum ZsStatus zs_index_save(const struct ZsIndex *index, const char *path);

/**
 * Number of indexed units (documents or paragraphs); 0 for a null handle.
 *
 * # Safety
 * `index` must be null or come from this library.
 */
size_t zs_index_doc_count(const struct ZsIndex *index);

/**
 * # Safety
 * `index` must be null or a handle not yet freed.
 */
void zs_index_free(struct ZsIndex *index);

/**
 * BM25 top-`k` for `query`. Paragraph hits are reported as `doc#n`.
 *
 * # Safety
 * `index` must come from this library; `query` must be a valid C string;
 * `out` a valid pointer.
 */
enum ZsStatus zs_index_search(const struct ZsIndex *index,
                              const char *query,
                              size_t k,
                              double k1,
                              double b,
                              struct ZsHits **out);

/**
 * # Safety
 * `hits` must be null or come from this library.
 */
size_t zs_hits_len(const struct ZsHits *hits);

/**
 * Doc id at rank `i` (0-based), or null when out of range.
 *
 * # Safety
 * `hits` must be null or come from this library.
 */
const char *zs_hits_doc_id(const struct ZsHits *hits, size_t i);

/**
 * Score at rank `i` (0-based), or NaN when out of range.
 *
 * # Safety
 * `hits` must be null or come from this library.
 */
double zs_hits_score(const struct ZsHits *hits, size_t i);

/**
 * # Safety
 * `hits` must be null or a handle not yet freed.
 */
void zs_hits_free(struct ZsHits *hits);

/**
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum ZsStatus zs_run_read(const char *path, struct ZsRun **out);

/**
 * # Safety
 * `run` must come from this library; `path` must be a valid C string.
 */
enum ZsStatus zs_run_write(const struct ZsRun *run, const char *path);

/**
 * Number of topics in the run; 0 for a null handle.
 *
 * # Safety
 * `run` must be null or come from this library.
 */
size_t zs_run_topic_count(const struct ZsRun *run);

/**
 * # Safety
 * `run` must be null or a handle not yet freed.
 */
void zs_run_free(struct ZsRun *run);

/**
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum ZsStatus zs_qrels_read(const char *path, struct ZsQrels **out);

/**
 * # Safety
 * `qrels` must be null or a handle not yet freed.
 */
void zs_qrels_free(struct ZsQrels *qrels);

/**
 * Mean of `metric` (`ndcg@10`, `p@5`, `p@5f`, `j@10`, `mrr@10`, ...) over
 * the run topics that have judgments. `out_topics` may be null.
 *
 * # Safety
 * Handles must come from this library; `metric` must be a valid C string;
 * `out_mean` a valid pointer.
 */
enum ZsStatus zs_evaluate(const struct ZsRun *run,
                          const struct ZsQrels *qrels,
                          const char *metric,
                          double *out_mean,
                          size_t *out_topics);

/**
 * Per-topic value of `metric`. Fails with `OutOfRange` when the topic is
 * absent from the run or has no judgments.
 *
 * # Safety
 * Handles must come from this library; strings must be valid C strings;
 * `out` a valid pointer.
 */
enum ZsStatus zs_evaluate_topic(const struct ZsRun *run,
                                const struct ZsQrels *qrels,
                                const char *metric,
                                const char *topic,
                                double *out);

/**
 * Reciprocal rank fusion of `n` runs, each cut to `depth` per topic.
 *
 * # Safety
 * `runs` must point to `n` handles from this library; `out` must be valid.
 */
enum ZsStatus zs_rrf_fuse(const struct ZsRun *const *runs,
                          size_t n,
                          double rrf_k,
                          size_t depth,
                          struct ZsRun **out);

/**
 * Lexicon from in-memory phrases. With `default_exclusions` set the
 * built-in exclusion list is used and `exclusions` is ignored.
 *
 * # Safety
 * `phrases` must point to `n_phrases` C strings and `exclusions` to
 * `n_exclusions` C strings (either may be null when its count is 0).
 */
enum ZsStatus zs_lexicon_new(const char *const *phrases,
                             size_t n_phrases,
                             const char *const *exclusions,
                             size_t n_exclusions,
                             bool default_exclusions,
                             struct ZsLexicon **out);

/**
 * Lexicon file with one phrase per line. A null `exclusions_path` selects
 * the built-in exclusion list.
 *
 * # Safety
 * `path` must be a valid C string, `exclusions_path` null or a valid C
 * string, `out` a valid pointer.
 */
enum ZsStatus zs_lexicon_load(const char *path,
                              const char *exclusions_path,
                              struct ZsLexicon **out);

/**
 * # Safety
 * `lexicon` must come from this library; `text` must be a valid C string;
 * `out` a valid pointer.
 */
enum ZsStatus zs_lexicon_matches(const struct ZsLexicon *lexicon, const char *text, bool *out);

/**
 * # Safety
 * `lexicon` must be null or a handle not yet freed.
 */
void zs_lexicon_free(struct ZsLexicon *lexicon);

/**
 * Pairwise loss log(1 + exp(s_neg - s_pos)).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ZsStatus zs_pairwise_loss(double s_pos, double s_neg, double *out);

/**
 * Partial derivatives of the pairwise loss.
 *
 * # Safety
 * Both output pointers must be valid.
 */
enum ZsStatus zs_loss_gradient(double s_pos, double s_neg, double *out_d_pos, double *out_d_neg);

/**
 * Two-sided paired t-test over `n` topics; `a[i]` and `b[i]` belong to the
 * same topic. `out_t` may be null.
 *
 * # Safety
 * `a` and `b` must point to `n` doubles; `out_p` must be valid.
 */
enum ZsStatus zs_paired_t_test(const double *a,
                               const double *b,
                               size_t n,
                               double *out_t,
                               double *out_p);

/**
 * Bonferroni-adjusted p-value, min(1, p * m).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ZsStatus zs_bonferroni(double p, size_t m, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZSRANK_H */
