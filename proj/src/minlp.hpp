#pragma once

#include <map>
#include <string>
#include <vector>

#include "simenv.hpp"

namespace ctp {

// Solver-agnostic algebraic model of the tour-based exact formulation.
// Variables are fully index-expanded; constraints are one named line each;
// products of a work variable with its transition indicator stay bilinear.
struct MinlpModel {
  int n_tasks = 0;
  int n_robots = 0;
  int tours = 0;      // per-robot tour bound S
  int decisions = 0;  // per-tour decision bound H
  double max_payload = 0.0;
  double max_range = 0.0;
  double speed = 0.0;

  struct Node {
    int id = 0;
    double x = 0.0, y = 0.0;
    double deadline = 0.0, demand = 0.0;
    bool operator==(const Node&) const = default;
  };
  std::vector<Node> nodes;  // index 0 is the depot

  struct Term {
    double coeff = 0.0;
    std::string a;
    std::string b;  // empty for linear terms
    bool operator==(const Term&) const = default;
  };
  struct Constraint {
    std::string name;
    std::vector<Term> terms;
    std::string rel;  // "=", "<=", ">=", "in"
    double rhs = 0.0;
    double lo = 0.0, hi = 0.0;  // for "in"
    bool operator==(const Constraint&) const = default;
  };
  struct Indicator {
    std::string name;
    std::string flag;  // binary set to 1 iff expr_var <= rhs
    std::string expr;
    double rhs = 0.0;
    bool operator==(const Indicator&) const = default;
  };

  std::vector<std::pair<std::string, char>> variables;  // (name, 'b' or 'c')
  std::vector<Term> objective;                          // maximized
  double objective_constant = 0.0;
  std::vector<Constraint> constraints;
  std::vector<Indicator> indicators;

  size_t variable_count() const { return variables.size(); }
  size_t constraint_count() const { return constraints.size() + indicators.size(); }
  size_t family_count(const std::string& family_prefix) const;

  bool operator==(const MinlpModel&) const = default;
};

// Sufficient default bounds for the exported model.
int default_tour_bound(const Scenario& s);
int default_decision_bound(const Scenario& s);

MinlpModel build_minlp(const Scenario& s, int tours, int decisions);

std::string minlp_to_string(const MinlpModel& m);
MinlpModel minlp_from_string(const std::string& text);
void export_minlp(const Scenario& s, int tours, int decisions, const std::string& path);
MinlpModel load_minlp(const std::string& path);

// --- trace validation ---

struct TraceViolation {
  std::string family;   // constraint family name, e.g. "range_bounds"
  std::string indices;  // offending index tuple, e.g. "[2,1,1]"
  std::string detail;
};

struct TraceReport {
  bool mappable = true;
  std::string mapping_error;
  std::vector<TraceViolation> violations;
  int n_success = 0;

  bool clean() const { return mappable && violations.empty(); }
};

// Maps a completed event log onto the model's tour/decision variables and
// checks every constraint family against it. The all-demand-met equality is
// checked in its <= direction only: an honest episode may end with missed
// tasks. n_success is re-derived from completion times, independent of the
// simulator's own counter.
TraceReport trace_validate(const EventLog& log, const Scenario& s, int tours,
                           int decisions);

// Bounds observed in a log (useful defaults for trace_validate).
void observed_bounds(const EventLog& log, const Scenario& s, int& tours, int& decisions);

}  // namespace ctp
