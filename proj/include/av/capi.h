/* C API for the agentic-verifier selection engine.
 *
 * All functions return av_status; AV_OK is 0. Functions producing
 * output write a heap-allocated JSON string into *out_json; release it
 * with av_string_free. On failure av_engine_last_error holds a
 * human-readable message until the next call on the same engine.
 */
#ifndef AV_CAPI_H
#define AV_CAPI_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum av_status {
  AV_OK = 0,
  AV_ERR_PARSE = 1,
  AV_ERR_CONSTRAINT = 2,
  AV_ERR_MISMATCH = 3,
  AV_ERR_IO = 4,
  AV_ERR_SANDBOX = 5,
  AV_ERR_CONFIG = 6,
  AV_ERR_EMPTY_POOL = 7,
  AV_ERR_POOL_TOO_SMALL = 8,
  AV_ERR_BAD_K = 9,
  AV_ERR_BACKEND = 10,
  AV_ERR_INTERNAL = 11
} av_status;

typedef struct av_engine av_engine;

const char* av_version(void);
const char* av_status_name(av_status status);

/* Creates an engine from a JSON config (NULL or "" for defaults):
 * {
 *   "corpus_root": ".", "workers": 0, "python": "python3", "cxx": "c++",
 *   "cxx_flags": ["-O2","-std=c++17"], "env_allowlist": [],
 *   "scratch_root": "", "drop_privileges": true, "isolate_network": true,
 *   "prompts_dir": "",
 *   "limits": {"time_limit_ms": 2000, "memory_limit_kib": 262144,
 *              "output_limit_bytes": 16777216, "compile_time_limit_ms": 30000}
 * }
 */
av_status av_engine_create(const char* config_json, av_engine** out_engine);
void av_engine_destroy(av_engine* engine);

/* Message for the most recent failure on this engine (never NULL).
 * Pass NULL to read the thread-local message from a failed
 * av_engine_create. */
const char* av_engine_last_error(const av_engine* engine);

void av_string_free(char* s);

/* Validates and installs a problems file plus a directory of candidate
 * bundles into the corpus root. Reports counts. */
av_status av_ingest(av_engine* engine, const char* problems_path, const char* candidates_dir,
                    char** out_json);

/* Labels a problem's candidates against a suite ("ground-truth" = the
 * problem's own tests), writes labels back to the bundle and reports
 * pass@1. */
av_status av_judge(av_engine* engine, const char* problem_id, const char* suite,
                   char** out_json);

/* Runs one selection. Request:
 * {"method":"mbr-hard","problem":"p1","inputs":"suite","budget":64,
 *  "seed":42,"max_turns":16,"judge_attempts":10}
 * methods: vanilla|mbr-hard|mbr-soft|codet|coderm|randgen|agentic. */
av_status av_select(av_engine* engine, const char* request_json, char** out_json);

/* Consensus test synthesis. Request:
 * {"problem":"p1","refs":"<path>","raw_inputs":"<path>","tau":0.8,
 *  "max_suite":60,"write_back":true} */
av_status av_synth(av_engine* engine, const char* request_json, char** out_json);

/* Runs one verifier episode. Task: {"problem_id":"p1","a":0,"b":1};
 * backend: "script:<path>" or an http(s) chat-completion URL. */
av_status av_agent_run(av_engine* engine, const char* task_json, const char* backend,
                       int max_turns, char** out_json);

/* Best@k estimation. Request:
 * {"pool":"<path>","k":8,"repeats":100,"seed":0,"method":"vanilla"}
 * or {"pool_inline":{"problem_id":"p","correct":[true,false]},...};
 * method may also be "oracle". */
av_status av_best_at_k(av_engine* engine, const char* request_json, char** out_json);

/* Runs a declarative experiment config file over the corpus. */
av_status av_experiment(av_engine* engine, const char* config_path, char** out_json);

#ifdef __cplusplus
}
#endif

#endif /* AV_CAPI_H */
