#include "bench.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "threading.hpp"

namespace ctp {

std::string to_string(Method m) {
  switch (m) {
    case Method::CapamTd: return "capam-td";
    case Method::Capam: return "capam";
    case Method::Mlp: return "mlp";
    case Method::FeasRnd: return "feasrnd";
    case Method::BigMrta: return "bigmrta";
    case Method::Exact: return "exact";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "capam-td") return Method::CapamTd;
  if (s == "capam") return Method::Capam;
  if (s == "mlp") return Method::Mlp;
  if (s == "feasrnd") return Method::FeasRnd;
  if (s == "bigmrta") return Method::BigMrta;
  if (s == "exact") return Method::Exact;
  throw std::invalid_argument("unknown method: " + s);
}

double SteadyClock::now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::vector<double> CellResult::completions(bool include_failed) const {
  std::vector<double> out;
  for (const auto& s : samples)
    if (include_failed || !s.failed) out.push_back(s.completion_pct);
  return out;
}

double CellResult::mean_completion() const {
  const auto c = completions();
  return c.empty() ? 0.0 : mean(c);
}

double CellResult::mean_decision_time() const {
  std::vector<double> t;
  for (const auto& s : samples)
    if (!s.failed) t.push_back(s.decision_time_s);
  return t.empty() ? 0.0 : mean(t);
}

EpisodeOutcome run_timed_episode(std::shared_ptr<const Scenario> scenario, Clock& clock,
                                 const DecideFn& decide, const EpisodeHooks& hooks) {
  const uint64_t seed = scenario->seed;
  WorldState world = WorldState::reset(std::move(scenario), seed);
  EpisodeOutcome out;
  while (auto who = world.advance_to_decision()) {
    const double t0 = clock.now();
    const int action = decide(world, *who);
    const double t1 = clock.now();
    out.latencies.push_back(t1 - t0);
    out.decision_time_s += t1 - t0;
    world.apply_action(*who, action);
    if (hooks.after_step) hooks.after_step();
  }
  out.n_success = world.count_success();
  out.completion_pct = 100.0 * out.n_success / world.scenario().task_count();
  out.comm_bytes = world.comm_bytes_total();
  out.decisions = world.decisions();
  return out;
}

DecideFactory make_decider(Method method, const PolicyParams* params) {
  switch (method) {
    case Method::FeasRnd:
      return [](uint64_t episode_seed) -> DecideFn {
        auto rng = std::make_shared<Rng>(derive_seed(episode_seed, 0xfea5));
        return [rng](const WorldState& w, int robot) {
          return feasrnd_action(w, robot, *rng);
        };
      };
    case Method::BigMrta:
      return [](uint64_t) -> DecideFn {
        return [](const WorldState& w, int robot) { return bigmrta_action(w, robot); };
      };
    case Method::CapamTd:
    case Method::Capam:
    case Method::Mlp: {
      if (!params) throw std::invalid_argument("learned method needs a checkpoint");
      const PolicyVariant v = method == Method::CapamTd  ? PolicyVariant::CapamTd
                              : method == Method::Capam ? PolicyVariant::Capam
                                                        : PolicyVariant::Mlp;
      return [params, v](uint64_t) -> DecideFn {
        auto runner = std::make_shared<PolicyRunner>(*params);
        runner->set_variant(v);
        runner->start_episode();
        return [runner](const WorldState& w, int robot) {
          return runner->decide(w.observe(robot));
        };
      };
    }
    case Method::Exact:
      throw std::invalid_argument("exact method is not episode-driven");
  }
  return {};
}

namespace {

SampleResult run_sample(Method method, const PolicyParams* params,
                        const GenerationConfig& gen, uint64_t scenario_seed,
                        Clock& clock) {
  SampleResult out;
  out.scenario_seed = scenario_seed;
  try {
    const Scenario scenario = generate_scenario(gen, scenario_seed);
    out.scenario_hash = scenario_hash(scenario);

    if (method == Method::Exact) {
      const double t0 = clock.now();
      const ExactSolution sol = brute_force_optimal(scenario);
      out.decision_time_s = clock.now() - t0;
      out.median_latency_s = out.decision_time_s;
      if (!sol.exhaustive) {
        out.failed = true;
        return out;
      }
      out.n_success = sol.n_success;
      out.completion_pct = 100.0 * sol.n_success / scenario.task_count();
      out.decisions = static_cast<long long>(sol.schedule.size());
      return out;
    }

    const DecideFactory factory = make_decider(method, params);
    const EpisodeOutcome ep = run_timed_episode(
        std::make_shared<const Scenario>(scenario), clock, factory(scenario_seed));
    out.completion_pct = ep.completion_pct;
    out.n_success = ep.n_success;
    out.decision_time_s = ep.decision_time_s;
    out.comm_bytes = ep.comm_bytes;
    out.decisions = ep.decisions;
    if (!ep.latencies.empty()) {
      std::vector<double> lat = ep.latencies;
      out.median_latency_s = quantiles(std::move(lat)).median;
    }
  } catch (const std::exception&) {
    out.failed = true;  // recorded, never imputed
  }
  return out;
}

}  // namespace

ResultsTable run_experiment(const ExperimentSpec& spec, Clock* clock) {
  SteadyClock steady;
  Clock& clk = clock ? *clock : steady;

  std::map<Method, PolicyParams> loaded;
  for (Method m : spec.methods) {
    auto it = spec.checkpoints.find(m);
    if (it != spec.checkpoints.end()) loaded.emplace(m, load_checkpoint(it->second));
  }

  ResultsTable table;
  table.spec = spec;
  for (size_t cell_ix = 0; cell_ix < spec.cells.size(); ++cell_ix) {
    const auto [lt, lr] = spec.cells[cell_ix];
    GenerationConfig gen = spec.base;
    gen.lambda_t = lt;
    gen.lambda_r = lr;

    // Identical scenario stream for every method in this cell.
    std::vector<uint64_t> seeds(spec.samples_per_cell);
    for (int s = 0; s < spec.samples_per_cell; ++s)
      seeds[s] = derive_seed(spec.seed, cell_ix, s);

    for (Method method : spec.methods) {
      CellResult cell;
      cell.method = method;
      cell.lambda_t = lt;
      cell.lambda_r = lr;
      cell.n_tasks = gen.task_count();
      cell.n_robots = gen.robot_count();
      cell.samples.resize(spec.samples_per_cell);
      const PolicyParams* params = nullptr;
      if (auto it = loaded.find(method); it != loaded.end()) params = &it->second;

      if (spec.serial_timing) {
        for (int s = 0; s < spec.samples_per_cell; ++s)
          cell.samples[s] = run_sample(method, params, gen, seeds[s], clk);
      } else {
        parallel_for(spec.samples_per_cell, spec.threads, [&](int b, int e, int) {
          for (int s = b; s < e; ++s)
            cell.samples[s] = run_sample(method, params, gen, seeds[s], clk);
        });
      }
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

double significance_test(const std::vector<double>& a, const std::vector<double>& b) {
  return welch_t_test(a, b).p;
}

void emit_results(const ResultsTable& table, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir))
    throw std::runtime_error("cannot create results directory: " + out_dir);

  {
    std::ofstream csv(out_dir + "/results.csv");
    csv << "method,lambda_t,lambda_r,n_tasks,n_robots,sample,scenario_seed,"
           "scenario_hash,completion_pct,n_success,decision_time_s,median_latency_s,"
           "comm_bytes,decisions,failed\n";
    char buf[512];
    for (const CellResult& c : table.cells)
      for (size_t s = 0; s < c.samples.size(); ++s) {
        const SampleResult& r = c.samples[s];
        std::snprintf(buf, sizeof(buf),
                      "%s,%.17g,%.17g,%d,%d,%zu,%llu,%llu,%.17g,%d,%.17g,%.17g,%lld,%lld,%d\n",
                      to_string(c.method).c_str(), c.lambda_t, c.lambda_r, c.n_tasks,
                      c.n_robots, s, static_cast<unsigned long long>(r.scenario_seed),
                      static_cast<unsigned long long>(r.scenario_hash), r.completion_pct,
                      r.n_success, r.decision_time_s, r.median_latency_s, r.comm_bytes,
                      r.decisions, r.failed ? 1 : 0);
        csv << buf;
      }
  }

  {
    std::ofstream q(out_dir + "/quantiles.csv");
    q << "method,n_tasks,n_robots,min,q1,median,q3,max,n\n";
    for (const CellResult& c : table.cells) {
      const auto comp = c.completions();
      if (comp.empty()) continue;
      const Quantiles qq = quantiles(comp);
      q << to_string(c.method) << "," << c.n_tasks << "," << c.n_robots << "," << qq.min
        << "," << qq.q1 << "," << qq.median << "," << qq.q3 << "," << qq.max << ","
        << comp.size() << "\n";
    }
  }

  {
    std::ofstream s(out_dir + "/summary.txt");
    s << "cells: " << table.cells.size() << ", samples per cell: "
      << table.spec.samples_per_cell << "\n\n";
    for (size_t a = 0; a < table.cells.size(); ++a) {
      const CellResult& c = table.cells[a];
      s << to_string(c.method) << " N=" << c.n_tasks << " M=" << c.n_robots
        << ": mean completion " << c.mean_completion() << "%, mean decision time "
        << c.mean_decision_time() << " s, samples " << c.samples.size() << "\n";
    }
    s << "\npairwise Welch t-test p-values (completion %):\n";
    for (size_t a = 0; a < table.cells.size(); ++a)
      for (size_t b = a + 1; b < table.cells.size(); ++b) {
        const CellResult& ca = table.cells[a];
        const CellResult& cb = table.cells[b];
        if (ca.n_tasks != cb.n_tasks || ca.n_robots != cb.n_robots) continue;
        const auto xa = ca.completions();
        const auto xb = cb.completions();
        if (xa.size() < 2 || xb.size() < 2) continue;
        s << to_string(ca.method) << " vs " << to_string(cb.method) << " (N=" << ca.n_tasks
          << ", M=" << ca.n_robots << "): p=" << significance_test(xa, xb) << "\n";
      }
  }

  {
    nlohmann::json meta;
    meta["schema"] = 1;
    meta["seed"] = table.spec.seed;
    meta["samples_per_cell"] = table.spec.samples_per_cell;
    meta["serial_timing"] = table.spec.serial_timing;
    meta["notes"] = {
        {"feature_scaling",
         "task features (x, y, deadline, remaining demand) are each scaled to [0,1] "
         "before any distance computation"},
        {"td_matrix",
         "the topology affinity matrix is symmetric-normalized before it enters the "
         "encoder"},
        {"timing",
         "decision time excludes simulation stepping; ratios between methods are the "
         "primary timing statistic"}};
    std::ofstream mf(out_dir + "/metadata.json");
    mf << meta.dump(2) << "\n";
  }
}

ResultsTable load_results_csv(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open: " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty results csv");

  ResultsTable table;
  CellResult* cur = nullptr;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string field;
    auto next = [&]() {
      if (!std::getline(is, field, ',')) throw std::runtime_error("short csv row");
      return field;
    };
    const Method method = method_from_string(next());
    const double lt = std::stod(next());
    const double lr = std::stod(next());
    const int n_tasks = std::stoi(next());
    const int n_robots = std::stoi(next());
    next();  // sample index
    SampleResult r;
    r.scenario_seed = std::stoull(next());
    r.scenario_hash = std::stoull(next());
    r.completion_pct = std::stod(next());
    r.n_success = std::stoi(next());
    r.decision_time_s = std::stod(next());
    r.median_latency_s = std::stod(next());
    r.comm_bytes = std::stoll(next());
    r.decisions = std::stoll(next());
    r.failed = next() == "1";

    if (!cur || cur->method != method || cur->n_tasks != n_tasks ||
        cur->n_robots != n_robots || cur->lambda_t != lt || cur->lambda_r != lr) {
      table.cells.push_back({});
      cur = &table.cells.back();
      cur->method = method;
      cur->lambda_t = lt;
      cur->lambda_r = lr;
      cur->n_tasks = n_tasks;
      cur->n_robots = n_robots;
    }
    cur->samples.push_back(r);
  }
  return table;
}

}  // namespace ctp
