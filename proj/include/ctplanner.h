/* ctplanner — multi-robot collective-transport planning engine.
 *
 * C API over the C++ core: opaque handles, integer status codes, thread-local
 * error messages. All functions return CTP_OK on success; on failure the
 * detailed message is available via ctp_last_error() until the next call on
 * the same thread.
 */
#ifndef CTPLANNER_H
#define CTPLANNER_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ctp_status {
  CTP_OK = 0,
  CTP_ERR_INVALID_ARGUMENT = 1,
  CTP_ERR_IO = 2,
  CTP_ERR_PARSE = 3,
  CTP_ERR_STATE = 4,
  CTP_ERR_INTERNAL = 5
} ctp_status;

const char* ctp_status_name(ctp_status s);
const char* ctp_last_error(void);
uint32_t ctp_version(void);

/* ---- scenarios ---- */

typedef struct ctp_scenario ctp_scenario;

ctp_status ctp_scenario_generate(double lambda_t, double lambda_r, uint64_t seed,
                                 ctp_scenario** out);
ctp_status ctp_scenario_load(const char* path, ctp_scenario** out);
ctp_status ctp_scenario_save(const ctp_scenario* s, const char* path);
void ctp_scenario_free(ctp_scenario* s);
int ctp_scenario_task_count(const ctp_scenario* s);
int ctp_scenario_robot_count(const ctp_scenario* s);
uint64_t ctp_scenario_hash(const ctp_scenario* s);

/* ---- policies ---- */

typedef struct ctp_policy ctp_policy;

/* variant: "capam-td" | "capam" | "mlp" */
ctp_status ctp_policy_init(const char* variant, uint64_t seed, ctp_policy** out);
ctp_status ctp_policy_load(const char* checkpoint_path, ctp_policy** out);
ctp_status ctp_policy_save(const ctp_policy* p, const char* checkpoint_path);
void ctp_policy_free(ctp_policy* p);

/* ---- simulation ---- */

typedef struct ctp_sim_result {
  double completion_pct;
  int n_success;
  int n_tasks;
  double terminal_reward;
  double makespan_s;       /* simulated clock at termination */
  double decision_time_s;  /* wall time spent inside decisions only */
  int64_t comm_bytes;
  int64_t decisions;
} ctp_sim_result;

/* method: "feasrnd" | "bigmrta" | "capam-td" | "capam" | "mlp".
 * policy may be NULL for the non-learned methods. full_communication != 0
 * overrides the scenario's communication range with an unbounded one.
 * log_path, when non-NULL, receives the event log. */
ctp_status ctp_simulate(const ctp_scenario* s, const char* method,
                        const ctp_policy* policy, uint64_t seed, int full_communication,
                        const char* log_path, ctp_sim_result* out);

/* ---- training ---- */

/* config_json_path may be NULL for the desk-scale default profile; see the
 * README for the config schema. Writes checkpoints and learning curves into
 * out_dir; returns the final checkpoint path in final_checkpoint (which must
 * hold at least path_cap bytes) when non-NULL. */
ctp_status ctp_train(const char* config_json_path, uint64_t seed, const char* out_dir,
                     char* final_checkpoint, size_t path_cap);

/* Mean completion percent over held-out scenarios, greedy decisions. */
ctp_status ctp_evaluate(const ctp_policy* policy, const char* variant_override,
                        double lambda_t, double lambda_r, int episodes, uint64_t seed,
                        double* mean_completion_pct);

/* ---- baselines and verification ---- */

typedef struct ctp_exact_result {
  int n_success;
  int exhaustive;
  int64_t nodes_expanded;
} ctp_exact_result;

ctp_status ctp_solve_exact(const ctp_scenario* s, int64_t max_nodes, int max_depth,
                           ctp_exact_result* out);

/* tours/decisions <= 0 select the documented default bounds. */
ctp_status ctp_export_minlp(const ctp_scenario* s, int tours, int decisions,
                            const char* out_path);

typedef struct ctp_validation_result {
  int mappable;
  int violations;
  int n_success;
} ctp_validation_result;

/* tours/decisions <= 0 use the bounds observed in the log itself. */
ctp_status ctp_validate_trace(const ctp_scenario* s, const char* log_path, int tours,
                              int decisions, ctp_validation_result* out);

/* ---- benchmark harness ---- */

/* spec_json_path: experiment description (methods, cells, samples, seeds,
 * checkpoints); results are written into out_dir. */
ctp_status ctp_bench_run(const char* spec_json_path, const char* out_dir);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CTPLANNER_H */
