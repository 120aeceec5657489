/* C API for the smnas search engine.
 *
 * All functions are synchronous. Inputs and outputs are UTF-8 strings
 * (usually JSON documents). Output strings are heap-allocated and owned by
 * the caller; release them with smnas_string_free. On any failure the return
 * code is nonzero and smnas_last_error(ctx) describes the problem.
 *
 * Status codes double as process exit codes:
 *   0 success, 2 invalid input or config, 3 I/O failure, 4 runtime/evaluator
 * failure.
 */
#ifndef SMNAS_H
#define SMNAS_H

#ifdef __cplusplus
extern "C" {
#endif

typedef struct smnas_ctx smnas_ctx;

typedef enum {
  SMNAS_OK = 0,
  SMNAS_ERR_INVALID = 2,
  SMNAS_ERR_IO = 3,
  SMNAS_ERR_RUNTIME = 4,
} smnas_status;

smnas_ctx* smnas_ctx_new(void);
void smnas_ctx_free(smnas_ctx* ctx);
const char* smnas_last_error(const smnas_ctx* ctx);
void smnas_string_free(char* s);

/* Parse a backbone encoding string; returns a JSON summary with the
 * canonical form, block family, depth and doubling count. */
smnas_status smnas_encoding_normalize(smnas_ctx* ctx, const char* text, char** out_json);

/* Validate a structural config (JSON) against a space definition (JSON,
 * NULL for the default space). out_json reports {"valid": bool,
 * "violations": [{field, rule}...], "config": normalized}. Violations leave
 * the status at SMNAS_OK; only malformed input is an error. */
smnas_status smnas_config_validate(smnas_ctx* ctx, const char* config_json,
                                   const char* space_json, char** out_json);

/* Cost query: {"backbone": name | {"encoding": ...} | "config": {...},
 * "resolution": {"width": W, "height": H}, "trunk_only": bool?}. Returns a
 * cost profile {flops_g, params_m, mac_m, latency_ms?}. */
smnas_status smnas_cost(smnas_ctx* ctx, const char* query_json, char** out_json);

/* Run (or resume) a search described by a run-config JSON document; paths
 * inside the config resolve against base_dir (NULL: cwd). Returns a summary
 * with the journal path, evaluation counts and the final front. */
smnas_status smnas_search(smnas_ctx* ctx, const char* run_config_json, const char* base_dir,
                          int resume, char** out_json);

/* Journal consumers. format is "csv" or "json". */
smnas_status smnas_export_front(smnas_ctx* ctx, const char* journal_path, const char* format,
                                char** out_text);
smnas_status smnas_select(smnas_ctx* ctx, const char* journal_path, int k, char** out_json);
smnas_status smnas_analyze(smnas_ctx* ctx, const char* journal_path, char** out_csv);

#ifdef __cplusplus
}
#endif

#endif /* SMNAS_H */
