#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scenario.hpp"

namespace ctp {

// Action indices: 0 selects the depot, 1..N the task with that id.
constexpr int kDepotNode = 0;

struct RobotState {
  int id = 0;
  double from_x = 0.0, from_y = 0.0;   // leg origin
  double dest_x = 0.0, dest_y = 0.0;   // leg destination
  int from_node = kDepotNode;
  int dest_node = kDepotNode;
  double depart_time = 0.0;
  double arrive_time = 0.0;
  double range_km = 0.0;               // remaining tour range, updated at arrival
  double payload_kg = 0.0;
  double next_decision_time = 0.0;
  double last_decision_time = 0.0;
  bool docked = false;

  // Linear interpolation along the current leg.
  void position_at(double t, double& x, double& y) const;
};

enum class TaskStatus { Active, Done, Missed };

struct TaskState {
  double remaining_kg = 0.0;
  TaskStatus status = TaskStatus::Active;
  double completion_time = -1.0;  // set when status becomes Done
};

// What one robot knows about one peer; stamp is the simulation time the peer
// generated the record (its last decision instant). seq disambiguates
// same-instant publications so a newer record at an equal stamp still wins.
struct PeerRecord {
  double dest_x = 0.0, dest_y = 0.0;
  double range_km = 0.0;
  double payload_kg = 0.0;
  double next_decision_time = 0.0;
  double stamp = 0.0;
  uint64_t seq = 0;

  bool newer_than(const PeerRecord& other) const {
    return stamp != other.stamp ? stamp > other.stamp : seq > other.seq;
  }
  bool operator==(const PeerRecord&) const = default;
};

struct BeliefRecord {
  std::vector<PeerRecord> robots;   // one per robot, self row kept current
  std::vector<double> completion;   // fraction of each task's demand met, in [0,1]
  std::vector<uint8_t> visited;     // 1 once a task is known completed
};

struct Event {
  double time = 0.0;
  int kind = 0;  // 0 = episode start, 1 = arrival
  int robot = 0;
};

// One completed leg of a robot tour.
struct LegRecord {
  int robot = 0;
  int from_node = 0;
  int to_node = 0;
  double depart = 0.0;
  double arrive = 0.0;
  double delivered_kg = 0.0;
};

using EventLog = std::vector<LegRecord>;

void save_event_log(const EventLog& log, const std::string& path);
EventLog load_event_log(const std::string& path);

// Everything a robot sees when it must decide: the task graph snapshot built
// from its own belief (not ground truth), the operation time, its own state,
// and the believed peer table (destinations, ranges, capacities, next and
// last decision times). context packs the normalized features the policy
// consumes; peer entries there are mean-aggregated.
struct Observation {
  int robot = 0;
  double time = 0.0;
  Eigen::MatrixXd task_features;        // N x 4
  std::vector<uint8_t> feasible;        // N+1; index 0 = depot, always true
  Eigen::VectorXd context;              // 9 entries, see build order in simenv.cpp
  PeerRecord own;                       // the deciding robot's current record
  std::vector<PeerRecord> peers;        // believed table, one row per robot
};

struct ReplaySummary {
  int n_success = 0;
  double reward = 0.0;
};

// Event-driven world. Single-owner: one driver mutates it; independent
// episodes run on independent instances. Copyable for search.
class WorldState {
public:
  static WorldState reset(std::shared_ptr<const Scenario> scenario, uint64_t seed);

  // Processes events (deadline expiry, arrivals, information exchange) until
  // some robot must decide. Returns its id, or nullopt once terminal.
  std::optional<int> advance_to_decision();

  // The feasibility mask for the deciding robot, from its belief: depot is
  // always allowed; task i needs believed-active status, payload on board and
  // enough range for robot -> i -> depot.
  std::vector<uint8_t> feasible_mask(int robot) const;

  Observation observe(int robot) const;

  // Applies the decision of `robot` (must be the robot returned by
  // advance_to_decision). Throws std::logic_error on an infeasible action.
  void apply_action(int robot, int action);

  bool is_terminal() const;

  // Terminal objective: -(N - N_success)/N. Throws if called before terminal.
  double compute_reward() const;

  int count_success() const;

  // Accessors (mainly for baselines, metrics and tests).
  const Scenario& scenario() const { return *scenario_; }
  const NormalizationTable& normalization() const { return norm_; }
  double time() const { return clock_; }
  const std::vector<RobotState>& robots() const { return robots_; }
  const std::vector<TaskState>& tasks() const { return tasks_; }
  const BeliefRecord& belief(int robot) const { return beliefs_[robot]; }
  const EventLog& log() const { return log_; }
  long long decisions() const { return decisions_; }

  // Bytes of one directional belief share: 6 doubles per robot plus the task
  // completion vector.
  long long exchange_payload_bytes() const {
    return (6ll * scenario_->fleet.robot_count + scenario_->task_count()) * 8;
  }
  long long comm_bytes_total() const { return comm_bytes_; }

  // Pairwise belief merge across all robot pairs currently within
  // communication range (strict inequality), in ascending (i, j) order.
  // Exposed for tests; advance_to_decision calls it at every event.
  void exchange_information();

  // Remaining demand of task i as believed by `robot`.
  double believed_remaining(int robot, int task_index) const;
  bool believed_active(int robot, int task_index) const;

  double distance_from_robot(int robot, int node) const;
  double node_x(int node) const;
  double node_y(int node) const;

private:
  WorldState() = default;

  void expire_deadlines();
  void handle_arrival(int robot);
  void publish_self(int robot);
  void merge_pair(int a, int b);
  double travel_seconds(double km) const { return km * 1000.0 / scenario_->fleet.speed_mps; }

  std::shared_ptr<const Scenario> scenario_;
  NormalizationTable norm_;
  uint64_t seed_ = 0;
  double clock_ = 0.0;
  std::vector<RobotState> robots_;
  std::vector<TaskState> tasks_;
  std::vector<BeliefRecord> beliefs_;
  std::vector<Event> events_;  // heap ordered by (time, robot)
  EventLog log_;
  long long decisions_ = 0;
  long long comm_bytes_ = 0;
  uint64_t publication_seq_ = 0;
  int pending_decision_ = -1;
};

// Re-derives the terminal outcome from a log alone (delivery amounts are
// taken from the records; completion times from the arrival clock).
ReplaySummary replay_event_log(const Scenario& s, const EventLog& log);

}  // namespace ctp
