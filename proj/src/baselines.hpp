#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "rng.hpp"
#include "simenv.hpp"

namespace ctp {

// Uniform random choice over feasible tasks; the depot only when nothing else
// is feasible.
int feasrnd_action(const WorldState& world, int robot, Rng& rng);

// Robot-task pairing suitabilities from the deciding robot's belief. Rows are
// robots, columns tasks; pairs failing range or deadline feasibility are NaN
// (absent). incentive = urgency * fit with
//   urgency = max(0, (deadline - t - travel_time) / (deadline - t))
//   fit     = min(believed remaining, believed payload) / believed remaining.
struct IncentiveMatrix {
  Eigen::MatrixXd values;  // M x N, NaN where the pair is infeasible

  bool present(int r, int i) const { return std::isfinite(values(r, i)); }
};

IncentiveMatrix bigmrta_incentives(const WorldState& world, int robot);

// Decide by solving a maximum-weight matching over the belief-derived
// incentives and taking the task matched to this robot; depot if unmatched.
int bigmrta_action(const WorldState& world, int robot);

struct ExactCaps {
  long long max_nodes = 20'000'000;
  int max_depth = 256;
};

struct ExactSolution {
  int n_success = 0;
  bool exhaustive = false;
  long long nodes_expanded = 0;
  // Flattened best action schedule as (robot, action) in decision order.
  std::vector<std::pair<int, int>> schedule;
};

// Exhaustive depth-first search over interleaved robot decisions under full
// communication. Tiny instances only (N <= 6, M <= 2, enforced). Voluntary
// early retirement is never optimal here, so the depot-at-depot branch is
// explored only when no task is feasible.
ExactSolution brute_force_optimal(const Scenario& scenario, const ExactCaps& caps = {});

// Runs one full episode with a baseline decision rule; returns terminal world.
enum class BaselineKind { FeasRnd, BigMrta };
WorldState run_baseline_episode(std::shared_ptr<const Scenario> scenario, BaselineKind kind,
                                uint64_t seed, EventLog* log_out = nullptr);

}  // namespace ctp
