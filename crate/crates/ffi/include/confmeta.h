#ifndef CONFMETA_H
#define CONFMETA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum CmStatus {
  CM_STATUS_OK = 0,
  CM_STATUS_NULL_POINTER = 1,
  CM_STATUS_INVALID_UTF8 = 2,
  CM_STATUS_INVALID_ARGUMENT = 3,
  CM_STATUS_PARSE_ERROR = 4,
  CM_STATUS_IO_ERROR = 5,
  CM_STATUS_PANIC = 6,
} CmStatus;

// Source text indexed for repeated grounding checks.
typedef struct CmSource CmSource;

// A mapping vocabulary (labels to Wikidata items and properties).
typedef struct CmVocabulary CmVocabulary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *cm_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed already.
void cm_string_free(char *s);

// The vocabulary shipped with the library.
struct CmVocabulary *cm_vocabulary_builtin(void);

// Loads a vocabulary JSON file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum CmStatus cm_vocabulary_load(const char *path, struct CmVocabulary **out);

// # Safety
// `v` must come from this library (or be null) and not be used afterwards.
void cm_vocabulary_free(struct CmVocabulary *v);

// Renders a value (its JSON form) as a QuickStatements V1 token.
//
// # Safety
// `value_json` must be a NUL-terminated string and `out` a writable pointer.
enum CmStatus cm_qs_render_value(const char *value_json, char **out);

// Parses a V1 value token into its JSON form; `LAST` yields `"LAST"`.
//
// # Safety
// `token` must be a NUL-terminated string and `out` a writable pointer.
enum CmStatus cm_qs_parse_value(const char *token, char **out);

// Validates batch text against a vocabulary. Writes the violation count to
// `violations` and, when `report_json` is not null, the full report.
//
// # Safety
// `vocab` must be a live handle, `batch` a NUL-terminated string and
// `violations` writable; `report_json` may be null.
enum CmStatus cm_qs_validate(const struct CmVocabulary *vocab,
                             const char *batch,
                             size_t *violations,
                             char **report_json);

// Micro precision, recall and F1 from counts; a zero denominator gives 1.0.
//
// # Safety
// `p`, `r` and `f1` must be writable.
enum CmStatus cm_micro_prf(uint64_t tp,
                           uint64_t fp,
                           uint64_t fn_,
                           double *p,
                           double *r,
                           double *f1);

// Parses a model response for `task` (e.g. `"counts"`) into a JSON array
// of rows (column to string or null).
//
// # Safety
// `task_name` and `raw` must be NUL-terminated strings and `out` writable.
enum CmStatus cm_parse_output(const char *task_name, const char *raw, char **out);

// Grounding of each row in `rows_json` against `source_text`, as a JSON
// array of column-to-status maps.
//
// # Safety
// All string arguments must be NUL-terminated and `out` writable.
enum CmStatus cm_ground_check(const char *task_name,
                              const char *rows_json,
                              const char *source_text,
                              char **out);

// Indexes `source_text` once for many [`cm_source_ground_row`] calls.
//
// # Safety
// `source_text` must be NUL-terminated and `out` writable.
enum CmStatus cm_source_new(const char *source_text, struct CmSource **out);

// Grounding of one row (a JSON object) against an indexed source.
//
// # Safety
// `source` must be a live handle, the strings NUL-terminated, `out` writable.
enum CmStatus cm_source_ground_row(const struct CmSource *source,
                                   const char *task_name,
                                   const char *row_json,
                                   char **out);

// # Safety
// `s` must come from [`cm_source_new`] (or be null) and not be used afterwards.
void cm_source_free(struct CmSource *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONFMETA_H */
