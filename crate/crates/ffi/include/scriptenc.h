#ifndef SCRIPTENC_H
#define SCRIPTENC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SeStatus {
  SE_STATUS_OK = 0,
  SE_STATUS_NULL_POINTER = 1,
  SE_STATUS_INVALID_UTF8 = 2,
  SE_STATUS_PARSE = 3,
  SE_STATUS_DOMAIN = 4,
  SE_STATUS_INVALID_ARGUMENT = 5,
  SE_STATUS_INTERNAL = 6,
} SeStatus;

// Parsed screenplay.
typedef struct SeScreenplay SeScreenplay;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *se_last_error_message(void);

// # Safety
// `s` must come from this library and not have been freed.
void se_string_free(char *s);

// Parse screenplay text with the default parser settings.
//
// # Safety
// `title` and `text` must be NUL-terminated; `out` must be writable.
enum SeStatus se_screenplay_parse(const char *title, const char *text, struct SeScreenplay **out);

// # Safety
// `sp` must come from [`se_screenplay_parse`] and not have been freed.
void se_screenplay_free(struct SeScreenplay *sp);

// Number of scenes, or 0 for NULL.
//
// # Safety
// `sp` must be NULL or a live handle.
uintptr_t se_screenplay_scene_count(const struct SeScreenplay *sp);

// Title/Line/Scene/Type/Character/Text table as a new string.
//
// # Safety
// `sp` must be a live handle; `out` must be writable.
enum SeStatus se_screenplay_to_tsv(const struct SeScreenplay *sp, char **out);

// 2^entropy of `n` probabilities.
//
// # Safety
// `probs` must point to `n` doubles; `out` must be writable.
enum SeStatus se_tag_perplexity(const double *probs, uintptr_t n, double *out);

// Micro-F1 of two row-major `rows × cols` 0/1 matrices.
//
// # Safety
// `pred` and `gold` must point to `rows * cols` bytes; `out` must be writable.
enum SeStatus se_micro_f1(const uint8_t *pred,
                          const uint8_t *gold,
                          uintptr_t rows,
                          uintptr_t cols,
                          double *out);

// Centered moving average of `n` values into `out` (also `n` values).
//
// # Safety
// `values` and `out` must each point to `n` doubles.
enum SeStatus se_smooth(const double *values, uintptr_t n, uintptr_t window, double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SCRIPTENC_H */
