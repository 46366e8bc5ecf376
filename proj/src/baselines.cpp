#include "baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "assignment.hpp"

namespace ctp {

int feasrnd_action(const WorldState& world, int robot, Rng& rng) {
  const std::vector<uint8_t> mask = world.feasible_mask(robot);
  std::vector<int> tasks;
  for (size_t i = 1; i < mask.size(); ++i)
    if (mask[i]) tasks.push_back(static_cast<int>(i));
  if (tasks.empty()) return kDepotNode;
  return tasks[rng.integer(tasks.size())];
}

IncentiveMatrix bigmrta_incentives(const WorldState& world, int robot) {
  const Scenario& s = world.scenario();
  const int m = s.fleet.robot_count;
  const int n = s.task_count();
  const BeliefRecord& belief = world.belief(robot);
  const double t = world.time();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  IncentiveMatrix out;
  out.values = Eigen::MatrixXd::Constant(m, n, nan);

  for (int r = 0; r < m; ++r) {
    const PeerRecord& rec = belief.robots[r];
    if (rec.payload_kg <= 0.0) continue;
    for (int i = 0; i < n; ++i) {
      if (!world.believed_active(robot, i)) continue;
      const double remaining = world.believed_remaining(robot, i);
      if (remaining <= 0.0) continue;
      const TaskSpec& task = s.tasks[i];
      const double d_to_task = std::hypot(rec.dest_x - task.x, rec.dest_y - task.y);
      const double d_to_depot = std::hypot(task.x - s.depot_x, task.y - s.depot_y);
      if (d_to_task + d_to_depot > rec.range_km) continue;
      const double travel = d_to_task * 1000.0 / s.fleet.speed_mps;
      if (t + travel > task.deadline_s) continue;
      const double slack = task.deadline_s - t;
      if (slack <= 0.0) continue;
      const double urgency = std::max(0.0, (slack - travel) / slack);
      const double fit = std::min(remaining, rec.payload_kg) / remaining;
      out.values(r, i) = urgency * fit;
    }
  }
  return out;
}

int bigmrta_action(const WorldState& world, int robot) {
  const IncentiveMatrix inc = bigmrta_incentives(world, robot);
  std::vector<int> matched;
  max_weight_matching(inc.values, matched);
  const int task = matched[robot];
  if (task < 0) return kDepotNode;
  const std::vector<uint8_t> mask = world.feasible_mask(robot);
  return mask[task + 1] ? task + 1 : kDepotNode;
}

namespace {

struct SearchContext {
  ExactCaps caps;
  long long nodes = 0;
  bool exhausted = true;
  int best = -1;
  std::vector<std::pair<int, int>> best_schedule;
  std::vector<std::pair<int, int>> current;
};

int count_active(const WorldState& w) {
  int n = 0;
  for (const TaskState& t : w.tasks())
    if (t.status == TaskStatus::Active) ++n;
  return n;
}

std::vector<int> ordered_candidates(const WorldState& w, int robot) {
  const std::vector<uint8_t> mask = w.feasible_mask(robot);
  std::vector<int> tasks;
  for (size_t i = 1; i < mask.size(); ++i)
    if (mask[i]) tasks.push_back(static_cast<int>(i));
  std::sort(tasks.begin(), tasks.end(), [&](int a, int b) {
    const double da = w.scenario().tasks[a - 1].deadline_s;
    const double db = w.scenario().tasks[b - 1].deadline_s;
    return da != db ? da < db : a < b;
  });
  const bool parked_at_depot = w.distance_from_robot(robot, kDepotNode) == 0.0;
  if (tasks.empty()) return {kDepotNode};
  // Early reload is a real branch when afield; retiring while tasks remain
  // feasible never is.
  if (!parked_at_depot) tasks.push_back(kDepotNode);
  return tasks;
}

void dfs(WorldState world, SearchContext& ctx) {
  size_t applied = 0;
  while (true) {
    const std::optional<int> who = world.advance_to_decision();
    if (!who) {
      const int done = world.count_success();
      if (done > ctx.best) {
        ctx.best = done;
        ctx.best_schedule = ctx.current;
      }
      break;
    }
    if (world.count_success() + count_active(world) <= ctx.best) break;
    if (static_cast<int>(ctx.current.size()) >= ctx.caps.max_depth) {
      ctx.exhausted = false;
      break;
    }
    if (++ctx.nodes > ctx.caps.max_nodes) {
      ctx.exhausted = false;
      break;
    }

    const std::vector<int> cands = ordered_candidates(world, *who);
    if (cands.size() == 1) {
      world.apply_action(*who, cands[0]);
      ctx.current.emplace_back(*who, cands[0]);
      ++applied;
      continue;
    }
    for (int c : cands) {
      if (ctx.nodes > ctx.caps.max_nodes) break;
      WorldState branch = world;
      branch.apply_action(*who, c);
      ctx.current.emplace_back(*who, c);
      dfs(std::move(branch), ctx);
      ctx.current.pop_back();
    }
    break;
  }
  ctx.current.resize(ctx.current.size() - applied);
}

}  // namespace

ExactSolution brute_force_optimal(const Scenario& scenario, const ExactCaps& caps) {
  if (scenario.task_count() > 6 || scenario.fleet.robot_count > 2)
    throw std::invalid_argument("brute_force_optimal is limited to N <= 6, M <= 2");

  Scenario full_comm = scenario;
  full_comm.fleet.comm_range_m = 1e12;  // full communication
  auto shared = std::make_shared<const Scenario>(full_comm);

  SearchContext ctx;
  ctx.caps = caps;
  dfs(WorldState::reset(shared, scenario.seed), ctx);

  ExactSolution out;
  out.n_success = std::max(0, ctx.best);
  out.exhaustive = ctx.exhausted;
  out.nodes_expanded = ctx.nodes;
  out.schedule = ctx.best_schedule;
  return out;
}

WorldState run_baseline_episode(std::shared_ptr<const Scenario> scenario, BaselineKind kind,
                                uint64_t seed, EventLog* log_out) {
  WorldState world = WorldState::reset(std::move(scenario), seed);
  Rng rng(derive_seed(seed, 0xfea5));
  while (auto who = world.advance_to_decision()) {
    const int action = kind == BaselineKind::FeasRnd ? feasrnd_action(world, *who, rng)
                                                     : bigmrta_action(world, *who);
    world.apply_action(*who, action);
  }
  if (log_out) *log_out = world.log();
  return world;
}

}  // namespace ctp
