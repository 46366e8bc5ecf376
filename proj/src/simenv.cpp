#include "simenv.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ctp {

void RobotState::position_at(double t, double& x, double& y) const {
  if (t >= arrive_time || arrive_time <= depart_time) {
    x = dest_x;
    y = dest_y;
    return;
  }
  if (t <= depart_time) {
    x = from_x;
    y = from_y;
    return;
  }
  const double f = (t - depart_time) / (arrive_time - depart_time);
  x = from_x + f * (dest_x - from_x);
  y = from_y + f * (dest_y - from_y);
}

namespace {

struct EventOrder {
  // Min-heap by (time, robot id): simultaneous events resolve by robot id.
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.robot > b.robot;
  }
};

}  // namespace

WorldState WorldState::reset(std::shared_ptr<const Scenario> scenario, uint64_t seed) {
  scenario->validate();
  WorldState w;
  w.scenario_ = std::move(scenario);
  w.norm_ = normalize_features(*w.scenario_);
  w.seed_ = seed;

  const Scenario& s = *w.scenario_;
  const int m = s.fleet.robot_count;
  const int n = s.task_count();

  w.robots_.resize(m);
  for (int r = 0; r < m; ++r) {
    RobotState& rs = w.robots_[r];
    rs.id = r;
    rs.from_x = rs.dest_x = s.depot_x;
    rs.from_y = rs.dest_y = s.depot_y;
    rs.dest_node = kDepotNode;
    rs.range_km = s.fleet.max_range_km;
    rs.payload_kg = s.fleet.max_payload_kg;
  }

  w.tasks_.resize(n);
  for (int i = 0; i < n; ++i) w.tasks_[i].remaining_kg = s.tasks[i].demand_kg;

  PeerRecord initial;
  initial.dest_x = s.depot_x;
  initial.dest_y = s.depot_y;
  initial.range_km = s.fleet.max_range_km;
  initial.payload_kg = s.fleet.max_payload_kg;
  initial.next_decision_time = 0.0;
  initial.stamp = 0.0;
  w.beliefs_.resize(m);
  for (int r = 0; r < m; ++r) {
    w.beliefs_[r].robots.assign(m, initial);
    w.beliefs_[r].completion.assign(n, 0.0);
    w.beliefs_[r].visited.assign(n, 0);
  }

  for (int r = 0; r < m; ++r) w.events_.push_back({0.0, 0, r});
  std::make_heap(w.events_.begin(), w.events_.end(), EventOrder{});
  return w;
}

double WorldState::node_x(int node) const {
  return node == kDepotNode ? scenario_->depot_x : scenario_->tasks[node - 1].x;
}

double WorldState::node_y(int node) const {
  return node == kDepotNode ? scenario_->depot_y : scenario_->tasks[node - 1].y;
}

double WorldState::distance_from_robot(int robot, int node) const {
  const RobotState& r = robots_[robot];
  return std::hypot(r.dest_x - node_x(node), r.dest_y - node_y(node));
}

double WorldState::believed_remaining(int robot, int task_index) const {
  const double frac = beliefs_[robot].completion[task_index];
  return scenario_->tasks[task_index].demand_kg * (1.0 - frac);
}

bool WorldState::believed_active(int robot, int task_index) const {
  const BeliefRecord& b = beliefs_[robot];
  if (b.visited[task_index]) return false;
  if (b.completion[task_index] >= 1.0) return false;
  // Deadlines are global knowledge; expiry is applied eagerly here.
  if (clock_ > scenario_->tasks[task_index].deadline_s) return false;
  return true;
}

void WorldState::expire_deadlines() {
  for (size_t i = 0; i < tasks_.size(); ++i) {
    TaskState& t = tasks_[i];
    if (t.status == TaskStatus::Active && clock_ > scenario_->tasks[i].deadline_s)
      t.status = TaskStatus::Missed;
  }
}

void WorldState::publish_self(int robot) {
  const RobotState& r = robots_[robot];
  PeerRecord& rec = beliefs_[robot].robots[robot];
  rec.dest_x = r.dest_x;
  rec.dest_y = r.dest_y;
  rec.range_km = r.range_km;
  rec.payload_kg = r.payload_kg;
  rec.next_decision_time = r.next_decision_time;
  rec.stamp = clock_;
  rec.seq = ++publication_seq_;
}

void WorldState::merge_pair(int a, int b) {
  BeliefRecord& ba = beliefs_[a];
  BeliefRecord& bb = beliefs_[b];
  const int m = scenario_->fleet.robot_count;
  for (int k = 0; k < m; ++k) {
    if (bb.robots[k].newer_than(ba.robots[k])) ba.robots[k] = bb.robots[k];
    else if (ba.robots[k].newer_than(bb.robots[k])) bb.robots[k] = ba.robots[k];
  }
  const int n = scenario_->task_count();
  for (int i = 0; i < n; ++i) {
    const double c = std::max(ba.completion[i], bb.completion[i]);
    ba.completion[i] = c;
    bb.completion[i] = c;
    const uint8_t v = ba.visited[i] | bb.visited[i];
    ba.visited[i] = v;
    bb.visited[i] = v;
  }
  comm_bytes_ += 2 * exchange_payload_bytes();
}

void WorldState::exchange_information() {
  const int m = scenario_->fleet.robot_count;
  const double thresh_km = scenario_->fleet.comm_range_m / 1000.0;
  std::vector<double> xs(m), ys(m);
  for (int r = 0; r < m; ++r) robots_[r].position_at(clock_, xs[r], ys[r]);
  // Merges compound in ascending pair order within one instant; there is no
  // multi-hop flooding beyond what that ordering already yields.
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b)
      if (std::hypot(xs[a] - xs[b], ys[a] - ys[b]) < thresh_km) merge_pair(a, b);
}

void WorldState::handle_arrival(int robot) {
  RobotState& r = robots_[robot];
  const int node = r.dest_node;
  const double leg_km = std::hypot(r.dest_x - r.from_x, r.dest_y - r.from_y);
  double delivered = 0.0;

  if (node == kDepotNode) {
    r.range_km = scenario_->fleet.max_range_km;
    r.payload_kg = scenario_->fleet.max_payload_kg;
  } else {
    r.range_km -= leg_km;
    assert(r.range_km >= -1e-9);
    r.range_km = std::max(0.0, r.range_km);
    TaskState& t = tasks_[node - 1];
    if (t.status == TaskStatus::Active) {
      delivered = std::min(t.remaining_kg, r.payload_kg);
      t.remaining_kg -= delivered;
      r.payload_kg -= delivered;
      if (t.remaining_kg <= 0.0) {
        t.remaining_kg = 0.0;
        t.status = TaskStatus::Done;
        t.completion_time = clock_;
      }
    }
    // Being on site, the robot observes the task's true state regardless of
    // what it believed; without this a stale belief could loop forever.
    const double total = scenario_->tasks[node - 1].demand_kg;
    beliefs_[robot].completion[node - 1] =
        std::max(beliefs_[robot].completion[node - 1], 1.0 - t.remaining_kg / total);
    if (t.status == TaskStatus::Done) beliefs_[robot].visited[node - 1] = 1;
  }

  log_.push_back({robot, r.from_node, node, r.depart_time, clock_, delivered});
  r.from_node = node;
  r.from_x = r.dest_x;
  r.from_y = r.dest_y;
  r.depart_time = clock_;
  r.arrive_time = clock_;

  assert(r.range_km >= -1e-9 && r.range_km <= scenario_->fleet.max_range_km + 1e-9);
  assert(r.payload_kg >= -1e-9 && r.payload_kg <= scenario_->fleet.max_payload_kg + 1e-9);
}

std::optional<int> WorldState::advance_to_decision() {
  if (pending_decision_ >= 0)
    throw std::logic_error("previous decision has not been applied");

  while (true) {
    if (events_.empty()) {
      // Nothing in flight: let the remaining deadlines lapse.
      double max_deadline = clock_;
      for (size_t i = 0; i < tasks_.size(); ++i)
        if (tasks_[i].status == TaskStatus::Active)
          max_deadline = std::max(max_deadline, scenario_->tasks[i].deadline_s);
      clock_ = std::nextafter(max_deadline, std::numeric_limits<double>::infinity());
      expire_deadlines();
      return std::nullopt;
    }

    std::pop_heap(events_.begin(), events_.end(), EventOrder{});
    const Event ev = events_.back();
    events_.pop_back();

    assert(ev.time >= clock_);
    clock_ = ev.time;
    expire_deadlines();
    if (ev.kind == 1) handle_arrival(ev.robot);
    publish_self(ev.robot);
    exchange_information();

    pending_decision_ = ev.robot;
    ++decisions_;
    return ev.robot;
  }
}

std::vector<uint8_t> WorldState::feasible_mask(int robot) const {
  const int n = scenario_->task_count();
  std::vector<uint8_t> mask(n + 1, 0);
  mask[kDepotNode] = 1;
  const RobotState& r = robots_[robot];
  if (r.payload_kg <= 0.0) return mask;
  for (int i = 0; i < n; ++i) {
    if (!believed_active(robot, i)) continue;
    const double to_task = distance_from_robot(robot, i + 1);
    const double to_depot =
        std::hypot(node_x(i + 1) - scenario_->depot_x, node_y(i + 1) - scenario_->depot_y);
    if (to_task + to_depot <= r.range_km) mask[i + 1] = 1;
  }
  return mask;
}

Observation WorldState::observe(int robot) const {
  const Scenario& s = *scenario_;
  const int n = s.task_count();
  const int m = s.fleet.robot_count;
  const BeliefRecord& b = beliefs_[robot];

  Observation obs;
  obs.robot = robot;
  obs.time = clock_;
  obs.task_features.resize(n, 4);
  for (int i = 0; i < n; ++i) {
    const TaskSpec& t = s.tasks[i];
    obs.task_features.row(i) =
        norm_.normalize(t.x, t.y, t.deadline_s, believed_remaining(robot, i));
  }
  obs.feasible = feasible_mask(robot);

  const RobotState& r = robots_[robot];
  double peer_x = 0.0, peer_y = 0.0, peer_range = 0.0, peer_payload = 0.0;
  if (m > 1) {
    for (int k = 0; k < m; ++k) {
      if (k == robot) continue;
      const PeerRecord& p = b.robots[k];
      peer_x += norm_.x.forward(p.dest_x);
      peer_y += norm_.y.forward(p.dest_y);
      peer_range += p.range_km / s.fleet.max_range_km;
      peer_payload += p.payload_kg / s.fleet.max_payload_kg;
    }
    peer_x /= m - 1;
    peer_y /= m - 1;
    peer_range /= m - 1;
    peer_payload /= m - 1;
  }

  obs.context.resize(9);
  obs.context << norm_.deadline.forward(clock_),
      r.range_km / s.fleet.max_range_km,
      r.payload_kg / s.fleet.max_payload_kg,
      norm_.x.forward(r.dest_x), norm_.y.forward(r.dest_y),
      peer_x, peer_y, peer_range, peer_payload;
  obs.own = b.robots[robot];
  obs.peers = b.robots;
  return obs;
}

void WorldState::apply_action(int robot, int action) {
  if (robot != pending_decision_)
    throw std::logic_error("apply_action: not this robot's decision");
  const std::vector<uint8_t> mask = feasible_mask(robot);
  if (action < 0 || action >= static_cast<int>(mask.size()) || !mask[action])
    throw std::logic_error("apply_action: infeasible action " + std::to_string(action));
  pending_decision_ = -1;

  RobotState& r = robots_[robot];
  r.last_decision_time = clock_;

  const double dist = distance_from_robot(robot, action);
  if (action == kDepotNode && dist == 0.0) {
    // Retreat chosen while parked at the depot: the robot retires. Logged as
    // a zero-length depot self-leg so every decision has a log record.
    r.docked = true;
    r.next_decision_time = clock_;
    publish_self(robot);
    log_.push_back({robot, kDepotNode, kDepotNode, clock_, clock_, 0.0});
    return;
  }

  r.from_node = r.dest_node;
  r.from_x = r.dest_x;
  r.from_y = r.dest_y;
  r.dest_node = action;
  r.dest_x = node_x(action);
  r.dest_y = node_y(action);
  r.depart_time = clock_;
  r.arrive_time = clock_ + travel_seconds(dist);
  r.next_decision_time = r.arrive_time;
  publish_self(robot);

  events_.push_back({r.arrive_time, 1, robot});
  std::push_heap(events_.begin(), events_.end(), EventOrder{});
}

bool WorldState::is_terminal() const {
  for (const TaskState& t : tasks_)
    if (t.status == TaskStatus::Active) return false;
  for (const RobotState& r : robots_)
    if (!r.docked) return false;
  return true;
}

int WorldState::count_success() const {
  int n_success = 0;
  for (const TaskState& t : tasks_)
    if (t.status == TaskStatus::Done) ++n_success;
  return n_success;
}

double WorldState::compute_reward() const {
  if (!is_terminal()) throw std::logic_error("compute_reward called before terminal state");
  const int n = scenario_->task_count();
  return -static_cast<double>(n - count_success()) / n;
}

void save_event_log(const EventLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "ctlog v1\n";
  char buf[256];
  for (const LegRecord& l : log) {
    std::snprintf(buf, sizeof(buf), "leg %d %d %d %.17g %.17g %.17g\n", l.robot,
                  l.from_node, l.to_node, l.depart, l.arrive, l.delivered_kg);
    out << buf;
  }
}

EventLog load_event_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "ctlog v1")
    throw std::runtime_error("unrecognized log header");
  EventLog log;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string kw;
    LegRecord l;
    if (!(is >> kw >> l.robot >> l.from_node >> l.to_node >> l.depart >> l.arrive >>
          l.delivered_kg) ||
        kw != "leg")
      throw std::runtime_error("bad log record at line " + std::to_string(line_no));
    log.push_back(l);
  }
  return log;
}

ReplaySummary replay_event_log(const Scenario& s, const EventLog& log) {
  std::vector<double> remaining(s.task_count());
  std::vector<double> done_at(s.task_count(), -1.0);
  for (int i = 0; i < s.task_count(); ++i) remaining[i] = s.tasks[i].demand_kg;

  EventLog sorted = log;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const LegRecord& a, const LegRecord& b) { return a.arrive < b.arrive; });
  for (const LegRecord& l : sorted) {
    if (l.to_node == kDepotNode || l.delivered_kg <= 0.0) continue;
    double& rem = remaining[l.to_node - 1];
    rem -= l.delivered_kg;
    if (rem <= 1e-9 && done_at[l.to_node - 1] < 0.0) done_at[l.to_node - 1] = l.arrive;
  }

  ReplaySummary out;
  for (int i = 0; i < s.task_count(); ++i)
    if (done_at[i] >= 0.0 && done_at[i] <= s.tasks[i].deadline_s) ++out.n_success;
  out.reward = -static_cast<double>(s.task_count() - out.n_success) / s.task_count();
  return out;
}

}  // namespace ctp
