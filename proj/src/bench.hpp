#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "baselines.hpp"
#include "policy.hpp"
#include "scenario.hpp"
#include "simenv.hpp"
#include "stats.hpp"

namespace ctp {

enum class Method { CapamTd, Capam, Mlp, FeasRnd, BigMrta, Exact };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

// Pluggable monotonic clock so tests can fake time.
class Clock {
public:
  virtual ~Clock() = default;
  virtual double now() = 0;  // seconds
};

class SteadyClock : public Clock {
public:
  double now() override;
};

struct ExperimentSpec {
  std::vector<Method> methods;
  std::vector<std::pair<double, double>> cells;  // (lambda_t, lambda_r)
  int samples_per_cell = 100;
  uint64_t seed = 0;
  std::map<Method, std::string> checkpoints;  // learned methods
  bool serial_timing = true;  // reported timings default to serial execution
  int threads = 2;            // used only when serial_timing is off
  GenerationConfig base;
};

struct SampleResult {
  uint64_t scenario_seed = 0;
  uint64_t scenario_hash = 0;
  double completion_pct = 0.0;
  int n_success = 0;
  double decision_time_s = 0.0;   // sum over decisions, simulation excluded
  double median_latency_s = 0.0;  // per-decision latency median
  long long comm_bytes = 0;
  long long decisions = 0;
  bool failed = false;

  bool operator==(const SampleResult&) const = default;
};

struct CellResult {
  Method method = Method::FeasRnd;
  double lambda_t = 1.0, lambda_r = 1.0;
  int n_tasks = 0, n_robots = 0;
  std::vector<SampleResult> samples;

  std::vector<double> completions(bool include_failed = false) const;
  double mean_completion() const;
  double mean_decision_time() const;
};

struct ResultsTable {
  ExperimentSpec spec;
  std::vector<CellResult> cells;
};

struct EpisodeHooks {
  // Runs after every applied decision, outside the decision timer; the timer
  // isolation test injects sleeps here.
  std::function<void()> after_step;
};

struct EpisodeOutcome {
  double completion_pct = 0.0;
  int n_success = 0;
  double decision_time_s = 0.0;
  std::vector<double> latencies;
  long long comm_bytes = 0;
  long long decisions = 0;
};

using DecideFn = std::function<int(const WorldState&, int robot)>;

// Drives one episode, timing only the decide calls with the given clock.
EpisodeOutcome run_timed_episode(std::shared_ptr<const Scenario> scenario, Clock& clock,
                                 const DecideFn& decide, const EpisodeHooks& hooks = {});

// Builds the per-episode decision function for a method. The returned factory
// is called once per episode (fresh policy caches / RNG streams).
using DecideFactory = std::function<DecideFn(uint64_t episode_seed)>;
DecideFactory make_decider(Method method, const PolicyParams* params);

ResultsTable run_experiment(const ExperimentSpec& spec, Clock* clock = nullptr);

// Welch two-sample p-value (spec'd convenience wrapper).
double significance_test(const std::vector<double>& a, const std::vector<double>& b);

// results.csv + quantiles.csv + summary.txt + metadata.json in out_dir.
void emit_results(const ResultsTable& table, const std::string& out_dir);
ResultsTable load_results_csv(const std::string& csv_path);

}  // namespace ctp
