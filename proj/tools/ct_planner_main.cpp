// ct-planner: command-line front end for the ctplanner shared library.
// Talks to the engine exclusively through the C API.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "ctplanner.h"

namespace {

int check(ctp_status s, const char* what) {
  if (s == CTP_OK) return 0;
  std::fprintf(stderr, "ct-planner: %s failed: %s (%s)\n", what, ctp_last_error(),
               ctp_status_name(s));
  return 1;
}

struct ScenarioHandle {
  ctp_scenario* ptr = nullptr;
  ~ScenarioHandle() { ctp_scenario_free(ptr); }
};

struct PolicyHandle {
  ctp_policy* ptr = nullptr;
  ~PolicyHandle() { ctp_policy_free(ptr); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-robot collective-transport planner"};
  app.require_subcommand(1);

  // generate
  double lambda_t = 1.0, lambda_r = 1.0;
  uint64_t seed = 0;
  std::string out_path;
  auto* generate = app.add_subcommand("generate", "sample a problem instance");
  generate->add_option("--lambda-t", lambda_t, "task scale factor")->required();
  generate->add_option("--lambda-r", lambda_r, "robot scale factor")->required();
  generate->add_option("--seed", seed, "rng seed")->required();
  generate->add_option("--out", out_path, "scenario file to write")->required();

  // simulate
  std::string scenario_path, method = "feasrnd", checkpoint, log_out;
  bool full_comm = false;
  auto* simulate = app.add_subcommand("simulate", "run one episode");
  simulate->add_option("--scenario", scenario_path, "scenario file")->required();
  simulate->add_option("--policy", method,
                       "feasrnd | bigmrta | capam-td | capam | mlp");
  simulate->add_option("--checkpoint", checkpoint, "checkpoint for learned policies");
  simulate->add_option("--seed", seed, "episode seed");
  simulate->add_option("--log-out", log_out, "event log file to write");
  simulate->add_flag("--full-communication", full_comm,
                     "unbounded communication range");

  // train
  std::string config_path, out_dir;
  auto* train = app.add_subcommand("train", "train a policy with PPO");
  train->add_option("--config", config_path, "training config JSON (default: desk profile)");
  train->add_option("--seed", seed, "run seed");
  train->add_option("--out-dir", out_dir, "output directory")->required();

  // evaluate
  int episodes = 100;
  std::string variant_override;
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint");
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  evaluate->add_option("--lambda-t", lambda_t, "task scale factor");
  evaluate->add_option("--lambda-r", lambda_r, "robot scale factor");
  evaluate->add_option("--samples", episodes, "held-out episodes");
  evaluate->add_option("--seed", seed, "evaluation seed");
  evaluate->add_option("--variant", variant_override,
                       "override the encoder input (capam-td | capam | mlp)");

  // bench
  std::string spec_path;
  auto* bench = app.add_subcommand("bench", "run an experiment grid");
  bench->add_option("--spec", spec_path, "experiment spec JSON")->required();
  bench->add_option("--out-dir", out_dir, "results directory")->required();

  // solve-exact
  int64_t max_nodes = 0;
  int max_depth = 0;
  auto* exact = app.add_subcommand("solve-exact", "brute-force optimum (tiny instances)");
  exact->add_option("--scenario", scenario_path, "scenario file")->required();
  exact->add_option("--max-nodes", max_nodes, "search node cap");
  exact->add_option("--max-depth", max_depth, "search depth cap");

  // export-minlp
  int tours = 0, decisions = 0;
  auto* exportm = app.add_subcommand("export-minlp", "write the algebraic model file");
  exportm->add_option("--scenario", scenario_path, "scenario file")->required();
  exportm->add_option("--tours,-S", tours, "tour bound S (default: sufficient bound)");
  exportm->add_option("--decisions,-H", decisions, "decisions-per-tour bound H (default: N+1)");
  exportm->add_option("--out", out_path, "model file to write")->required();

  // validate-trace
  std::string log_path;
  auto* validate = app.add_subcommand("validate-trace", "check an event log");
  validate->add_option("--scenario", scenario_path, "scenario file")->required();
  validate->add_option("--log", log_path, "event log file")->required();
  validate->add_option("--tours,-S", tours, "tour bound S (default: observed)");
  validate->add_option("--decisions,-H", decisions, "decision bound H (default: observed)");

  CLI11_PARSE(app, argc, argv);

  if (generate->parsed()) {
    ScenarioHandle s;
    if (check(ctp_scenario_generate(lambda_t, lambda_r, seed, &s.ptr), "generate"))
      return 1;
    if (check(ctp_scenario_save(s.ptr, out_path.c_str()), "save")) return 1;
    std::printf("wrote %s (N=%d, M=%d, hash=%016" PRIx64 ")\n", out_path.c_str(),
                ctp_scenario_task_count(s.ptr), ctp_scenario_robot_count(s.ptr),
                ctp_scenario_hash(s.ptr));
    return 0;
  }

  if (simulate->parsed()) {
    ScenarioHandle s;
    if (check(ctp_scenario_load(scenario_path.c_str(), &s.ptr), "load scenario"))
      return 1;
    PolicyHandle p;
    if (!checkpoint.empty() &&
        check(ctp_policy_load(checkpoint.c_str(), &p.ptr), "load checkpoint"))
      return 1;
    ctp_sim_result r;
    if (check(ctp_simulate(s.ptr, method.c_str(), p.ptr, seed, full_comm ? 1 : 0,
                           log_out.empty() ? nullptr : log_out.c_str(), &r),
              "simulate"))
      return 1;
    std::printf("completion %.2f%% (%d/%d), reward %.4f, makespan %.1f s\n",
                r.completion_pct, r.n_success, r.n_tasks, r.terminal_reward, r.makespan_s);
    std::printf("decisions %lld, decision time %.4f s, comm bytes %lld\n",
                static_cast<long long>(r.decisions), r.decision_time_s,
                static_cast<long long>(r.comm_bytes));
    return 0;
  }

  if (train->parsed()) {
    char final_ckpt[4096] = {0};
    if (check(ctp_train(config_path.empty() ? nullptr : config_path.c_str(), seed,
                        out_dir.c_str(), final_ckpt, sizeof(final_ckpt)),
              "train"))
      return 1;
    std::printf("training finished; final checkpoint: %s\n", final_ckpt);
    return 0;
  }

  if (evaluate->parsed()) {
    PolicyHandle p;
    if (check(ctp_policy_load(checkpoint.c_str(), &p.ptr), "load checkpoint")) return 1;
    double mean_completion = 0.0;
    if (check(ctp_evaluate(p.ptr, variant_override.empty() ? nullptr : variant_override.c_str(),
                           lambda_t, lambda_r, episodes, seed, &mean_completion),
              "evaluate"))
      return 1;
    std::printf("mean completion over %d episodes: %.2f%%\n", episodes, mean_completion);
    return 0;
  }

  if (bench->parsed()) {
    if (check(ctp_bench_run(spec_path.c_str(), out_dir.c_str()), "bench")) return 1;
    std::printf("results written to %s\n", out_dir.c_str());
    return 0;
  }

  if (exact->parsed()) {
    ScenarioHandle s;
    if (check(ctp_scenario_load(scenario_path.c_str(), &s.ptr), "load scenario"))
      return 1;
    ctp_exact_result r;
    if (check(ctp_solve_exact(s.ptr, max_nodes, max_depth, &r), "solve-exact")) return 1;
    std::printf("optimal completions: %d (%s, %lld nodes)\n", r.n_success,
                r.exhaustive ? "exhaustive" : "capped",
                static_cast<long long>(r.nodes_expanded));
    return r.exhaustive ? 0 : 2;
  }

  if (exportm->parsed()) {
    ScenarioHandle s;
    if (check(ctp_scenario_load(scenario_path.c_str(), &s.ptr), "load scenario"))
      return 1;
    if (check(ctp_export_minlp(s.ptr, tours, decisions, out_path.c_str()), "export-minlp"))
      return 1;
    std::printf("wrote %s\n", out_path.c_str());
    return 0;
  }

  if (validate->parsed()) {
    ScenarioHandle s;
    if (check(ctp_scenario_load(scenario_path.c_str(), &s.ptr), "load scenario"))
      return 1;
    ctp_validation_result r;
    if (check(ctp_validate_trace(s.ptr, log_path.c_str(), tours, decisions, &r),
              "validate-trace"))
      return 1;
    if (!r.mappable) {
      std::printf("unmappable: %s\n", ctp_last_error());
      return 2;
    }
    std::printf("violations: %d, tasks completed on time: %d\n", r.violations, r.n_success);
    return r.violations == 0 ? 0 : 2;
  }

  return 0;
}
