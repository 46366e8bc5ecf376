#include "ctplanner.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <string>

#include "baselines.hpp"
#include "bench.hpp"
#include "json.hpp"
#include "minlp.hpp"
#include "policy.hpp"
#include "scenario.hpp"
#include "simenv.hpp"
#include "training.hpp"

using nlohmann::json;

namespace {

thread_local std::string g_last_error;

ctp_status fail(ctp_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <typename Fn>
ctp_status wrap(Fn&& fn) {
  try {
    return fn();
  } catch (const ctp::ParseError& e) {
    return fail(CTP_ERR_PARSE, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(CTP_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::logic_error& e) {
    return fail(CTP_ERR_STATE, e.what());
  } catch (const std::exception& e) {
    return fail(CTP_ERR_IO, e.what());
  } catch (...) {
    return fail(CTP_ERR_INTERNAL, "unknown error");
  }
}

ctp_status need(bool cond, const char* what) {
  return cond ? CTP_OK : fail(CTP_ERR_INVALID_ARGUMENT, std::string("null ") + what);
}

ctp::GenerationConfig overlay_generation(const json& j) {
  ctp::GenerationConfig g;
  if (j.contains("lambda_t")) g.lambda_t = j["lambda_t"];
  if (j.contains("lambda_r")) g.lambda_r = j["lambda_r"];
  if (j.contains("base_tasks")) g.base_tasks = j["base_tasks"];
  if (j.contains("base_robots")) g.base_robots = j["base_robots"];
  if (j.contains("demand_min_kg")) g.demand_min_kg = j["demand_min_kg"];
  if (j.contains("demand_max_kg")) g.demand_max_kg = j["demand_max_kg"];
  if (j.contains("deadline_min_s")) g.deadline_min_s = j["deadline_min_s"];
  if (j.contains("deadline_max_s")) g.deadline_max_s = j["deadline_max_s"];
  if (j.contains("max_payload_kg")) g.fleet.max_payload_kg = j["max_payload_kg"];
  if (j.contains("max_range_km")) g.fleet.max_range_km = j["max_range_km"];
  if (j.contains("speed_mps")) g.fleet.speed_mps = j["speed_mps"];
  if (j.contains("comm_range_m")) g.fleet.comm_range_m = j["comm_range_m"];
  return g;
}

}  // namespace

struct ctp_scenario {
  ctp::Scenario value;
};

struct ctp_policy {
  ctp::PolicyParams value;
};

extern "C" {

const char* ctp_status_name(ctp_status s) {
  switch (s) {
    case CTP_OK: return "ok";
    case CTP_ERR_INVALID_ARGUMENT: return "invalid argument";
    case CTP_ERR_IO: return "io error";
    case CTP_ERR_PARSE: return "parse error";
    case CTP_ERR_STATE: return "state error";
    case CTP_ERR_INTERNAL: return "internal error";
  }
  return "?";
}

const char* ctp_last_error(void) { return g_last_error.c_str(); }

uint32_t ctp_version(void) { return 100; }  // 0.1.0

ctp_status ctp_scenario_generate(double lambda_t, double lambda_r, uint64_t seed,
                                 ctp_scenario** out) {
  if (ctp_status s = need(out != nullptr, "output handle"); s != CTP_OK) return s;
  return wrap([&]() {
    ctp::GenerationConfig cfg;
    cfg.lambda_t = lambda_t;
    cfg.lambda_r = lambda_r;
    *out = new ctp_scenario{ctp::generate_scenario(cfg, seed)};
    return CTP_OK;
  });
}

ctp_status ctp_scenario_load(const char* path, ctp_scenario** out) {
  if (ctp_status s = need(path && out, "argument"); s != CTP_OK) return s;
  return wrap([&]() {
    *out = new ctp_scenario{ctp::load_scenario(path)};
    return CTP_OK;
  });
}

ctp_status ctp_scenario_save(const ctp_scenario* s, const char* path) {
  if (ctp_status st = need(s && path, "argument"); st != CTP_OK) return st;
  return wrap([&]() {
    ctp::save_scenario(s->value, path);
    return CTP_OK;
  });
}

void ctp_scenario_free(ctp_scenario* s) { delete s; }

int ctp_scenario_task_count(const ctp_scenario* s) {
  return s ? s->value.task_count() : 0;
}

int ctp_scenario_robot_count(const ctp_scenario* s) {
  return s ? s->value.fleet.robot_count : 0;
}

uint64_t ctp_scenario_hash(const ctp_scenario* s) {
  return s ? ctp::scenario_hash(s->value) : 0;
}

ctp_status ctp_policy_init(const char* variant, uint64_t seed, ctp_policy** out) {
  if (ctp_status s = need(variant && out, "argument"); s != CTP_OK) return s;
  return wrap([&]() {
    ctp::PolicyConfig cfg = ctp::desk_policy_config(ctp::policy_variant_from_string(variant));
    *out = new ctp_policy{ctp::PolicyParams::init(cfg, seed)};
    return CTP_OK;
  });
}

ctp_status ctp_policy_load(const char* checkpoint_path, ctp_policy** out) {
  if (ctp_status s = need(checkpoint_path && out, "argument"); s != CTP_OK) return s;
  return wrap([&]() {
    *out = new ctp_policy{ctp::load_checkpoint(checkpoint_path)};
    return CTP_OK;
  });
}

ctp_status ctp_policy_save(const ctp_policy* p, const char* checkpoint_path) {
  if (ctp_status s = need(p && checkpoint_path, "argument"); s != CTP_OK) return s;
  return wrap([&]() {
    ctp::save_checkpoint(p->value, checkpoint_path);
    return CTP_OK;
  });
}

void ctp_policy_free(ctp_policy* p) { delete p; }

ctp_status ctp_simulate(const ctp_scenario* s, const char* method,
                        const ctp_policy* policy, uint64_t seed, int full_communication,
                        const char* log_path, ctp_sim_result* out) {
  if (ctp_status st = need(s && method && out, "argument"); st != CTP_OK) return st;
  return wrap([&]() {
    const ctp::Method m = ctp::method_from_string(method);
    if (m == ctp::Method::Exact)
      throw std::invalid_argument("use ctp_solve_exact for the exact method");
    const bool learned =
        m == ctp::Method::CapamTd || m == ctp::Method::Capam || m == ctp::Method::Mlp;
    if (learned && !policy) throw std::invalid_argument("method requires a policy handle");

    ctp::Scenario scenario = s->value;
    scenario.seed = seed;
    if (full_communication) scenario.fleet.comm_range_m = 1e12;
    auto shared = std::make_shared<const ctp::Scenario>(scenario);

    ctp::SteadyClock clock;
    const ctp::DecideFactory factory =
        ctp::make_decider(m, learned ? &policy->value : nullptr);
    const ctp::DecideFn decide = factory(seed);

    ctp::WorldState world = ctp::WorldState::reset(shared, seed);
    double decision_time = 0.0;
    while (auto who = world.advance_to_decision()) {
      const double t0 = clock.now();
      const int action = decide(world, *who);
      decision_time += clock.now() - t0;
      world.apply_action(*who, action);
    }

    out->completion_pct = 100.0 * world.count_success() / scenario.task_count();
    out->n_success = world.count_success();
    out->n_tasks = scenario.task_count();
    out->terminal_reward = world.compute_reward();
    out->makespan_s = world.time();
    out->decision_time_s = decision_time;
    out->comm_bytes = world.comm_bytes_total();
    out->decisions = world.decisions();
    if (log_path) ctp::save_event_log(world.log(), log_path);
    return CTP_OK;
  });
}

ctp_status ctp_train(const char* config_json_path, uint64_t seed, const char* out_dir,
                     char* final_checkpoint, size_t path_cap) {
  if (ctp_status st = need(out_dir != nullptr, "out_dir"); st != CTP_OK) return st;
  return wrap([&]() {
    ctp::PpoConfig ppo = ctp::PpoConfig::desk_profile();
    ctp::PolicyConfig pol = ctp::desk_policy_config();
    ctp::GenerationConfig gen = ctp::desk_scenario_config();
    std::string resume;

    if (config_json_path) {
      std::ifstream in(config_json_path);
      if (!in) throw std::runtime_error(std::string("cannot open config: ") + config_json_path);
      const json j = json::parse(in);
      const std::string profile = j.value("profile", "desk");
      if (profile == "paper") {
        ppo = ctp::PpoConfig{};
        pol = ctp::PolicyConfig{};
        gen = ctp::GenerationConfig{};
      } else if (profile != "desk") {
        throw std::invalid_argument("unknown profile: " + profile);
      }
      if (j.contains("scenario")) gen = overlay_generation(j["scenario"]);
      if (j.contains("policy")) {
        const json& p = j["policy"];
        if (p.contains("variant"))
          pol.variant = ctp::policy_variant_from_string(p["variant"]);
        if (p.contains("hidden")) pol.hidden = p["hidden"];
        if (p.contains("layers")) pol.layers = p["layers"];
        if (p.contains("moments")) pol.moments = p["moments"];
        if (p.contains("filter_degree")) pol.filter_degree = p["filter_degree"];
        if (p.contains("heads")) pol.heads = p["heads"];
        if (p.contains("context_hidden")) pol.context_hidden = p["context_hidden"];
        if (p.contains("critic_hidden")) pol.critic_hidden = p["critic_hidden"];
        if (p.contains("mlp_hidden")) pol.mlp_hidden = p["mlp_hidden"];
      }
      if (j.contains("ppo")) {
        const json& q = j["ppo"];
        if (q.contains("total_steps")) ppo.total_steps = q["total_steps"];
        if (q.contains("rollout_size")) ppo.rollout_size = q["rollout_size"];
        if (q.contains("batch_size")) ppo.batch_size = q["batch_size"];
        if (q.contains("learning_rate")) ppo.learning_rate = q["learning_rate"];
        if (q.contains("entropy_coef")) ppo.entropy_coef = q["entropy_coef"];
        if (q.contains("clip_ratio")) ppo.clip_ratio = q["clip_ratio"];
        if (q.contains("gamma")) ppo.gamma = q["gamma"];
        if (q.contains("gae_lambda")) ppo.gae_lambda = q["gae_lambda"];
        if (q.contains("epochs_per_update")) ppo.epochs_per_update = q["epochs_per_update"];
        if (q.contains("envs")) ppo.envs = q["envs"];
        if (q.contains("threads")) ppo.threads = q["threads"];
      }
      resume = j.value("resume_from", "");
    }

    const ctp::TrainingRun run = ctp::train(gen, pol, ppo, seed, out_dir, resume);
    if (final_checkpoint && path_cap > 0 && !run.checkpoints.empty()) {
      const std::string& last = run.checkpoints.back();
      std::strncpy(final_checkpoint, last.c_str(), path_cap - 1);
      final_checkpoint[path_cap - 1] = '\0';
    }
    return CTP_OK;
  });
}

ctp_status ctp_evaluate(const ctp_policy* policy, const char* variant_override,
                        double lambda_t, double lambda_r, int episodes, uint64_t seed,
                        double* mean_completion_pct) {
  if (ctp_status st = need(policy && mean_completion_pct, "argument"); st != CTP_OK)
    return st;
  return wrap([&]() {
    ctp::GenerationConfig gen;
    gen.lambda_t = lambda_t;
    gen.lambda_r = lambda_r;
    std::optional<ctp::PolicyVariant> forced;
    if (variant_override && *variant_override)
      forced = ctp::policy_variant_from_string(variant_override);
    *mean_completion_pct =
        ctp::evaluate_policy(policy->value, gen, seed, episodes, forced);
    return CTP_OK;
  });
}

ctp_status ctp_solve_exact(const ctp_scenario* s, int64_t max_nodes, int max_depth,
                           ctp_exact_result* out) {
  if (ctp_status st = need(s && out, "argument"); st != CTP_OK) return st;
  return wrap([&]() {
    ctp::ExactCaps caps;
    if (max_nodes > 0) caps.max_nodes = max_nodes;
    if (max_depth > 0) caps.max_depth = max_depth;
    const ctp::ExactSolution sol = ctp::brute_force_optimal(s->value, caps);
    out->n_success = sol.n_success;
    out->exhaustive = sol.exhaustive ? 1 : 0;
    out->nodes_expanded = sol.nodes_expanded;
    return CTP_OK;
  });
}

ctp_status ctp_export_minlp(const ctp_scenario* s, int tours, int decisions,
                            const char* out_path) {
  if (ctp_status st = need(s && out_path, "argument"); st != CTP_OK) return st;
  return wrap([&]() {
    const int t = tours > 0 ? tours : ctp::default_tour_bound(s->value);
    const int h = decisions > 0 ? decisions : ctp::default_decision_bound(s->value);
    ctp::export_minlp(s->value, t, h, out_path);
    return CTP_OK;
  });
}

ctp_status ctp_validate_trace(const ctp_scenario* s, const char* log_path, int tours,
                              int decisions, ctp_validation_result* out) {
  if (ctp_status st = need(s && log_path && out, "argument"); st != CTP_OK) return st;
  return wrap([&]() {
    const ctp::EventLog log = ctp::load_event_log(log_path);
    int t = tours, h = decisions;
    if (t <= 0 || h <= 0) {
      int ot, oh;
      ctp::observed_bounds(log, s->value, ot, oh);
      if (t <= 0) t = ot;
      if (h <= 0) h = oh;
    }
    const ctp::TraceReport rep = ctp::trace_validate(log, s->value, t, h);
    out->mappable = rep.mappable ? 1 : 0;
    out->violations = static_cast<int>(rep.violations.size());
    out->n_success = rep.n_success;
    if (!rep.mappable) g_last_error = rep.mapping_error;
    return CTP_OK;
  });
}

ctp_status ctp_bench_run(const char* spec_json_path, const char* out_dir) {
  if (ctp_status st = need(spec_json_path && out_dir, "argument"); st != CTP_OK) return st;
  return wrap([&]() {
    std::ifstream in(spec_json_path);
    if (!in) throw std::runtime_error(std::string("cannot open spec: ") + spec_json_path);
    const json j = json::parse(in);

    ctp::ExperimentSpec spec;
    for (const auto& m : j.at("methods"))
      spec.methods.push_back(ctp::method_from_string(m.get<std::string>()));
    for (const auto& c : j.at("cells"))
      spec.cells.emplace_back(c.at(0).get<double>(), c.at(1).get<double>());
    spec.samples_per_cell = j.value("samples_per_cell", 100);
    spec.seed = j.value("seed", 0);
    spec.serial_timing = j.value("serial_timing", true);
    spec.threads = j.value("threads", 2);
    if (j.contains("scenario")) spec.base = overlay_generation(j["scenario"]);
    if (j.contains("checkpoints"))
      for (const auto& [k, v] : j["checkpoints"].items())
        spec.checkpoints[ctp::method_from_string(k)] = v.get<std::string>();

    const ctp::ResultsTable table = ctp::run_experiment(spec);
    ctp::emit_results(table, out_dir);
    return CTP_OK;
  });
}

}  // extern "C"
