#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ctp {

// One delivery task. Positions in km, deadline in seconds, demand in kg.
struct TaskSpec {
  int id = 0;  // 1..N
  double x = 0.0;
  double y = 0.0;
  double deadline_s = 0.0;
  double demand_kg = 0.0;

  bool operator==(const TaskSpec&) const = default;
};

struct FleetSpec {
  int robot_count = 1;
  double max_payload_kg = 5.0;
  double max_range_km = 4.0;
  double speed_mps = 10.0;
  double comm_range_m = 100.0;

  bool operator==(const FleetSpec&) const = default;
};

// Immutable problem instance. Safe to share across threads once built.
struct Scenario {
  std::vector<TaskSpec> tasks;
  FleetSpec fleet;
  double depot_x = 0.5;
  double depot_y = 0.5;
  double arena_w_km = 1.0;
  double arena_h_km = 1.0;
  uint64_t seed = 0;

  int task_count() const { return static_cast<int>(tasks.size()); }

  // Throws std::invalid_argument on any structural violation (ids not a
  // permutation of 1..N, task outside arena, non-positive fleet values, ...).
  void validate() const;

  bool operator==(const Scenario&) const = default;
};

struct GenerationConfig {
  double lambda_t = 1.0;
  double lambda_r = 1.0;
  int base_tasks = 50;
  int base_robots = 6;
  double demand_min_kg = 1.0;
  double demand_max_kg = 10.0;
  double deadline_min_s = 150.0;
  double deadline_max_s = 600.0;
  double arena_w_km = 1.0;
  double arena_h_km = 1.0;
  FleetSpec fleet;  // robot_count is ignored; derived from the lambdas

  int task_count() const { return static_cast<int>(lambda_t * base_tasks); }
  int robot_count() const {
    return static_cast<int>(base_robots * lambda_t * lambda_r) + 1;
  }
};

// Samples a scenario: positions uniform over the arena, demands and deadlines
// uniform over their configured ranges. Deterministic for a fixed seed.
Scenario generate_scenario(const GenerationConfig& cfg, uint64_t seed);

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& msg, int line)
      : std::runtime_error(msg + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  int line() const { return line_; }

private:
  int line_ = 0;
};

// Versioned text format; save/load round-trips exactly (doubles are written
// with full precision). load throws ParseError and never returns a partially
// filled scenario.
void save_scenario(const Scenario& s, const std::string& path);
Scenario load_scenario(const std::string& path);
std::string scenario_to_string(const Scenario& s);
Scenario scenario_from_string(const std::string& text);

// Affine map v -> (v - lo) / (hi - lo). A degenerate feature (hi == lo) maps
// every value to 0 and raises the warning flag; its inverse returns lo.
struct FeatureMap {
  double lo = 0.0;
  double hi = 1.0;
  bool degenerate = false;

  double forward(double v) const { return degenerate ? 0.0 : (v - lo) / (hi - lo); }
  double inverse(double u) const { return degenerate ? lo : lo + u * (hi - lo); }
};

// Per-feature normalization derived from a scenario: x/y scaled by the arena,
// deadline and demand scaled by their min/max over the task list. Applied
// before any Euclidean distance so no physical unit dominates.
struct NormalizationTable {
  FeatureMap x;
  FeatureMap y;
  FeatureMap deadline;
  FeatureMap demand;

  bool any_degenerate() const {
    return x.degenerate || y.degenerate || deadline.degenerate || demand.degenerate;
  }

  Eigen::Vector4d normalize(double px, double py, double deadline_s,
                            double demand_kg) const {
    return {x.forward(px), y.forward(py), deadline.forward(deadline_s),
            demand.forward(demand_kg)};
  }
};

NormalizationTable normalize_features(const Scenario& s);

// FNV-1a over the canonical text form; used to confirm that benchmark cells
// feed identical instances to every method.
uint64_t scenario_hash(const Scenario& s);

}  // namespace ctp
