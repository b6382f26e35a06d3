#ifndef COMPMR_H
#define COMPMR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CompmrOp {
  COMPMR_OP_AND = 0,
  COMPMR_OP_OR = 1,
  COMPMR_OP_XOR = 2,
  COMPMR_OP_HAT_AND = 3,
  COMPMR_OP_HAT_OR = 4,
  COMPMR_OP_HAT_XOR = 5,
} CompmrOp;

// Result of a call.
typedef enum CompmrStatus {
  COMPMR_STATUS_OK = 0,
  COMPMR_STATUS_NULL_ARGUMENT = 1,
  COMPMR_STATUS_INVALID_UTF8 = 2,
  COMPMR_STATUS_PARSE = 3,
  COMPMR_STATUS_CONFIG = 4,
  COMPMR_STATUS_USAGE = 5,
  COMPMR_STATUS_IO = 6,
  COMPMR_STATUS_OUT_OF_RANGE = 7,
  COMPMR_STATUS_PANIC = 8,
} CompmrStatus;

// Outcome of a relation.
typedef enum CompmrValue {
  COMPMR_VALUE_TRUE = 0,
  COMPMR_VALUE_FALSE = 1,
  COMPMR_VALUE_OUT_OF_DOMAIN = 2,
  COMPMR_VALUE_NOT_COMPUTED = 3,
} CompmrValue;

// The candidates derived for a system.
typedef struct CompmrDerivation CompmrDerivation;

// A parsed relation expression.
typedef struct CompmrExpr CompmrExpr;

// A loaded system declaration.
typedef struct CompmrSpec CompmrSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call on the same thread.
const char *compmr_last_error(void);

// Library version as a static string.
const char *compmr_version(void);

// Release a string returned by this library.
//
// # Safety
// `s` must come from this library and not have been freed.
void compmr_string_free(char *s);

// Combine two outcomes with one operator. `op` is a `CompmrOp`, `a` and
// `b` are `CompmrValue`s; anything else is out of range.
//
// # Safety
// `out` must be valid for writes.
enum CompmrStatus compmr_combine(int32_t op, int32_t a, int32_t b, enum CompmrValue *out);

// Parse an expression such as `and(atom(N), hat_or(atom(K), atom(D)))`.
//
// # Safety
// `text` must be a nul-terminated string; `out` must be valid for writes.
enum CompmrStatus compmr_expr_parse(const char *text, struct CompmrExpr **out);

// Canonical text of an expression; free with `compmr_string_free`.
//
// # Safety
// `expr` must be a live handle; `out` must be valid for writes.
enum CompmrStatus compmr_expr_to_string(const struct CompmrExpr *expr, char **out);

// Infix rendering of an expression; free with `compmr_string_free`.
//
// # Safety
// `expr` must be a live handle; `out` must be valid for writes.
enum CompmrStatus compmr_expr_pretty(const struct CompmrExpr *expr, char **out);

// Evaluate an expression given the value of each atom. `ids` and `values`
// hold `n` entries, each value a `CompmrValue`; an atom missing from `ids`
// is a usage error.
//
// # Safety
// `ids` and `values` must point to `n` readable entries (or be null when
// `n` is 0); `out` must be valid for writes.
enum CompmrStatus compmr_expr_eval(const struct CompmrExpr *expr,
                                   const char *const *ids,
                                   const int32_t *values,
                                   size_t n,
                                   enum CompmrValue *out);

// # Safety
// `expr` must be null or a live handle, not used afterwards.
void compmr_expr_free(struct CompmrExpr *expr);

// Load a system declaration from a TOML file.
//
// # Safety
// `path` must be a nul-terminated string; `out` must be valid for writes.
enum CompmrStatus compmr_spec_load(const char *path, struct CompmrSpec **out);

// Load a system declaration from TOML text; relative paths resolve
// against `base_dir`.
//
// # Safety
// `toml` and `base_dir` must be nul-terminated strings; `out` must be
// valid for writes.
enum CompmrStatus compmr_spec_parse(const char *toml,
                                    const char *base_dir,
                                    struct CompmrSpec **out);

// # Safety
// `spec` must be null or a live handle, not used afterwards.
void compmr_spec_free(struct CompmrSpec *spec);

// Derive the candidate composites of a system.
//
// # Safety
// `spec` must be a live handle; `out` must be valid for writes.
enum CompmrStatus compmr_derive(const struct CompmrSpec *spec, struct CompmrDerivation **out);

// Number of candidates; 0 for a null handle.
//
// # Safety
// `d` must be null or a live handle.
size_t compmr_derivation_len(const struct CompmrDerivation *d);

// Copy of candidate `index`; free with `compmr_expr_free`.
//
// # Safety
// `d` must be a live handle; `out` must be valid for writes.
enum CompmrStatus compmr_derivation_candidate(const struct CompmrDerivation *d,
                                              size_t index,
                                              struct CompmrExpr **out);

// Input classes of candidate `index`, comma separated; free with
// `compmr_string_free`.
//
// # Safety
// `d` must be a live handle; `out` must be valid for writes.
enum CompmrStatus compmr_derivation_domain(const struct CompmrDerivation *d,
                                           size_t index,
                                           char **out);

// # Safety
// `d` must be null or a live handle, not used afterwards.
void compmr_derivation_free(struct CompmrDerivation *d);

// Run `expr` over the system's test groups under `workdir` and count the
// groups on which it is FALSE. Atoms the expression names must be declared
// by the system.
//
// # Safety
// `spec` and `expr` must be live handles; `workdir` a nul-terminated
// string; `groups` and `failed` valid for writes.
enum CompmrStatus compmr_run(struct CompmrSpec *spec,
                             const struct CompmrExpr *expr,
                             const char *workdir,
                             size_t parallel,
                             size_t *groups,
                             size_t *failed);

// Fraction of adjacent outputs that are not nested. Output k holds
// `lens[k]` items, stored one output after another in `items`.
//
// # Safety
// `lens` must point to `n` entries and `items` to their sum; `out` must
// be valid for writes.
enum CompmrStatus compmr_failures_metric(const uint64_t *items,
                                         const size_t *lens,
                                         size_t n,
                                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COMPMR_H */
