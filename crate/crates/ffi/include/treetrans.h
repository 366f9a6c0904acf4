#ifndef TREETRANS_H
#define TREETRANS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>

// Result code of every call.
typedef enum TtStatus {
  TT_STATUS_OK = 0,
  TT_STATUS_NULL_ARGUMENT = 1,
  TT_STATUS_INVALID_UTF8 = 2,
  TT_STATUS_IO = 3,
  TT_STATUS_PARSE = 4,
  TT_STATUS_BAD_CHECKPOINT = 5,
  TT_STATUS_UNKNOWN_SYMBOL = 6,
  TT_STATUS_MODEL = 7,
  TT_STATUS_PANIC = 8,
} TtStatus;

// A loaded symbol disambiguator.
typedef struct TtDisambiguator TtDisambiguator;

// A loaded translation checkpoint.
typedef struct TtModel TtModel;

// Parser switches; see [`tt_parser_options_default`].
typedef struct TtParserOptions {
  bool command_end;
  bool concat_end;
  bool infix_to_prefix;
  bool right_biggest;
} TtParserOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static string.
const char *tt_version(void);

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *tt_last_error(void);

struct TtParserOptions tt_parser_options_default(void);

// Parses `formula` into the canonical JSON tree and stores it in `*out_json`.
//
// # Safety
// `formula` must be a NUL-terminated string and `out_json` a valid pointer.
enum TtStatus tt_parse(const char *formula, struct TtParserOptions opts, char **out_json);

// Loads a translation checkpoint.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum TtStatus tt_model_load(const char *path, struct TtModel **out);

// # Safety
// `model` must come from [`tt_model_load`] and not be used afterwards. Null is ignored.
void tt_model_free(struct TtModel *model);

// Translates a generic formula into semantic LaTeX.
//
// # Safety
// `model` must be a live handle, `formula` NUL-terminated and `out` valid.
enum TtStatus tt_translate(const struct TtModel *model, const char *formula, char **out);

// Loads a disambiguator saved as JSON.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum TtStatus tt_disambiguator_load(const char *path, struct TtDisambiguator **out);

// # Safety
// `d` must come from [`tt_disambiguator_load`] and not be used afterwards. Null is ignored.
void tt_disambiguator_free(struct TtDisambiguator *d);

// Picks the semantic macro for `symbol` as it occurs in `formula`.
//
// # Safety
// `d` must be a live handle, the strings NUL-terminated and `out` valid.
enum TtStatus tt_disambiguate(const struct TtDisambiguator *d,
                              const char *symbol,
                              const char *formula,
                              char **out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void tt_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TREETRANS_H */
