#include "minlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctp {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string idx(std::initializer_list<int> xs) {
  std::string out = "[";
  bool first = true;
  for (int x : xs) {
    if (!first) out += ",";
    out += std::to_string(x);
    first = false;
  }
  return out + "]";
}

}  // namespace

size_t MinlpModel::family_count(const std::string& family_prefix) const {
  size_t n = 0;
  for (const auto& c : constraints)
    if (c.name.rfind(family_prefix + "[", 0) == 0) ++n;
  for (const auto& c : indicators)
    if (c.name.rfind(family_prefix + "[", 0) == 0) ++n;
  return n;
}

int default_tour_bound(const Scenario& s) {
  double total = 0.0;
  for (const auto& t : s.tasks) total += t.demand_kg;
  return static_cast<int>(
             std::ceil(total / (s.fleet.robot_count * s.fleet.max_payload_kg))) +
         1;
}

int default_decision_bound(const Scenario& s) { return s.task_count() + 1; }

MinlpModel build_minlp(const Scenario& s, int tours, int decisions) {
  if (tours < 1 || decisions < 1)
    throw std::invalid_argument("tour and decision bounds must be >= 1");
  s.validate();

  MinlpModel m;
  m.n_tasks = s.task_count();
  m.n_robots = s.fleet.robot_count;
  m.tours = tours;
  m.decisions = decisions;
  m.max_payload = s.fleet.max_payload_kg;
  m.max_range = s.fleet.max_range_km;
  m.speed = s.fleet.speed_mps;

  m.nodes.push_back({0, s.depot_x, s.depot_y, 0.0, 0.0});
  for (const TaskSpec& t : s.tasks)
    m.nodes.push_back({t.id, t.x, t.y, t.deadline_s, t.demand_kg});

  const int N = m.n_tasks, M = m.n_robots, S = tours, H = decisions;
  auto dist = [&](int i, int j) {
    return std::hypot(m.nodes[i].x - m.nodes[j].x, m.nodes[i].y - m.nodes[j].y);
  };
  auto travel = [&](int i, int j) { return dist(i, j) * 1000.0 / m.speed; };

  auto x = [](int i, int j, int h, int st, int r) {
    return "x" + idx({i, j, h, st, r});
  };
  auto e = [](int i, int j, int h, int st, int r) {
    return "e" + idx({i, j, h, st, r});
  };
  auto tv = [](int i, int j, int h, int st, int r) {
    return "time" + idx({i, j, h, st, r});
  };
  auto wv = [](int j, int h, int st) { return "w" + idx({j, h, st}); };
  auto cv = [](int h, int st, int r) { return "c" + idx({h, st, r}); };
  auto rv = [](int h, int st, int r) { return "range" + idx({h, st, r}); };

  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j)
      for (int h = 1; h <= H; ++h)
        for (int st = 1; st <= S; ++st)
          for (int r = 1; r <= M; ++r) {
            m.variables.emplace_back(x(i, j, h, st, r), 'b');
            m.variables.emplace_back(e(i, j, h, st, r), 'c');
            m.variables.emplace_back(tv(i, j, h, st, r), 'c');
          }
  for (int j = 1; j <= N; ++j)
    for (int h = 1; h <= H; ++h)
      for (int st = 1; st <= S; ++st) m.variables.emplace_back(wv(j, h, st), 'c');
  for (int h = 1; h <= H; ++h)
    for (int st = 1; st <= S; ++st)
      for (int r = 1; r <= M; ++r) {
        m.variables.emplace_back(cv(h, st, r), 'c');
        m.variables.emplace_back(rv(h, st, r), 'c');
      }
  for (int j = 1; j <= N; ++j) {
    m.variables.emplace_back("tdone" + idx({j}), 'c');
    m.variables.emplace_back("done" + idx({j}), 'b');
  }

  auto add = [&m](MinlpModel::Constraint c) { m.constraints.push_back(std::move(c)); };

  // Every tour departs from and returns to the depot.
  for (int st = 1; st <= S; ++st)
    for (int r = 1; r <= M; ++r) {
      MinlpModel::Constraint a{"tour_start" + idx({st, r}), {}, "=", 1.0, 0, 0};
      for (int j = 0; j <= N; ++j) a.terms.push_back({1.0, x(0, j, 1, st, r), ""});
      add(std::move(a));
      MinlpModel::Constraint b{"tour_end" + idx({st, r}), {}, "=", 1.0, 0, 0};
      for (int j = 0; j <= N; ++j) b.terms.push_back({1.0, x(j, 0, H, st, r), ""});
      add(std::move(b));
    }

  // At most one transition per decision slot.
  for (int h = 1; h <= H; ++h)
    for (int st = 1; st <= S; ++st)
      for (int r = 1; r <= M; ++r) {
        MinlpModel::Constraint c{"one_move" + idx({h, st, r}), {}, "<=", 1.0, 0, 0};
        for (int i = 0; i <= N; ++i)
          for (int j = 0; j <= N; ++j) c.terms.push_back({1.0, x(i, j, h, st, r), ""});
        add(std::move(c));
      }

  // A transition starts where the previous one ended.
  for (int i = 0; i <= N; ++i)
    for (int h = 2; h <= H; ++h)
      for (int st = 1; st <= S; ++st)
        for (int r = 1; r <= M; ++r) {
          MinlpModel::Constraint c{"continuity" + idx({i, h, st, r}), {}, "=", 0.0, 0, 0};
          for (int j = 0; j <= N; ++j) c.terms.push_back({1.0, x(i, j, h, st, r), ""});
          for (int k = 0; k <= N; ++k) c.terms.push_back({-1.0, x(k, i, h - 1, st, r), ""});
          add(std::move(c));
        }

  // Range accounting.
  for (int st = 1; st <= S; ++st)
    for (int r = 1; r <= M; ++r) {
      MinlpModel::Constraint c{"range_start" + idx({st, r}), {}, "=", m.max_range, 0, 0};
      c.terms.push_back({1.0, rv(1, st, r), ""});
      for (int i = 0; i <= N; ++i)
        for (int j = 0; j <= N; ++j)
          c.terms.push_back({dist(i, j), x(i, j, 1, st, r), ""});
      add(std::move(c));
    }
  for (int h = 2; h <= H; ++h)
    for (int st = 1; st <= S; ++st)
      for (int r = 1; r <= M; ++r) {
        MinlpModel::Constraint c{"range_step" + idx({h, st, r}), {}, "=", 0.0, 0, 0};
        c.terms.push_back({1.0, rv(h, st, r), ""});
        c.terms.push_back({-1.0, rv(h - 1, st, r), ""});
        for (int i = 0; i <= N; ++i)
          for (int j = 0; j <= N; ++j)
            c.terms.push_back({dist(i, j), x(i, j, h, st, r), ""});
        add(std::move(c));
      }
  for (int h = 1; h <= H; ++h)
    for (int st = 1; st <= S; ++st)
      for (int r = 1; r <= M; ++r) {
        add({"range_bounds" + idx({h, st, r}),
             {{1.0, rv(h, st, r), ""}},
             "in",
             0.0,
             0.0,
             m.max_range});
        add({"payload_bounds" + idx({h, st, r}),
             {{1.0, cv(h, st, r), ""}},
             "in",
             0.0,
             0.0,
             m.max_payload});
      }

  // Work (delivered kg) bounds and couplings.
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j)
      for (int h = 1; h <= H; ++h)
        for (int st = 1; st <= S; ++st)
          for (int r = 1; r <= M; ++r)
            add({"work_bounds" + idx({i, j, h, st, r}),
                 {{1.0, e(i, j, h, st, r), ""}},
                 "in",
                 0.0,
                 0.0,
                 m.max_payload});
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j)
      for (int h = 2; h <= H; ++h)
        for (int st = 1; st <= S; ++st)
          for (int r = 1; r <= M; ++r) {
            MinlpModel::Constraint c{"work_within_payload" + idx({i, j, h, st, r}),
                                     {},
                                     "<=",
                                     0.0,
                                     0,
                                     0};
            c.terms.push_back({1.0, e(i, j, h, st, r), ""});
            c.terms.push_back({-1.0, cv(h - 1, st, r), ""});
            add(std::move(c));
          }
  for (int i = 0; i <= N; ++i)
    for (int j = 1; j <= N; ++j)
      for (int h = 2; h <= H; ++h)
        for (int st = 1; st <= S; ++st)
          for (int r = 1; r <= M; ++r) {
            MinlpModel::Constraint c{"work_within_remaining" + idx({i, j, h, st, r}),
                                     {},
                                     "<=",
                                     m.nodes[j].demand,
                                     0,
                                     0};
            c.terms.push_back({1.0, e(i, j, h, st, r), ""});
            c.terms.push_back({1.0, wv(j, h - 1, st), ""});
            add(std::move(c));
          }

  // Cumulative demand met per task (bilinear in e and x, emitted as written).
  for (int j = 1; j <= N; ++j) {
    MinlpModel::Constraint c{"demand_first" + idx({j}), {}, "=", 0.0, 0, 0};
    c.terms.push_back({1.0, wv(j, 1, 1), ""});
    for (int i = 0; i <= N; ++i)
      for (int r = 1; r <= M; ++r)
        c.terms.push_back({-1.0, e(i, j, 1, 1, r), x(i, j, 1, 1, r)});
    add(std::move(c));
  }
  for (int j = 1; j <= N; ++j)
    for (int h = 2; h <= H; ++h)
      for (int st = 1; st <= S; ++st) {
        MinlpModel::Constraint c{"demand_step" + idx({j, h, st}), {}, "=", 0.0, 0, 0};
        c.terms.push_back({1.0, wv(j, h, st), ""});
        c.terms.push_back({-1.0, wv(j, h - 1, st), ""});
        for (int i = 0; i <= N; ++i)
          for (int r = 1; r <= M; ++r)
            c.terms.push_back({-1.0, e(i, j, h, st, r), x(i, j, h, st, r)});
        add(std::move(c));
      }
  for (int j = 1; j <= N; ++j)
    for (int st = 2; st <= S; ++st) {
      MinlpModel::Constraint c{"demand_carry" + idx({j, st}), {}, "=", 0.0, 0, 0};
      c.terms.push_back({1.0, wv(j, 1, st), ""});
      c.terms.push_back({-1.0, wv(j, H, st - 1), ""});
      for (int i = 0; i <= N; ++i)
        for (int r = 1; r <= M; ++r)
          c.terms.push_back({-1.0, e(i, j, 1, st, r), x(i, j, 1, st, r)});
      add(std::move(c));
    }

  // Payload accounting.
  for (int st = 1; st <= S; ++st)
    for (int r = 1; r <= M; ++r) {
      MinlpModel::Constraint c{"payload_start" + idx({st, r}), {}, "=", m.max_payload,
                               0, 0};
      c.terms.push_back({1.0, cv(1, st, r), ""});
      for (int i = 0; i <= N; ++i)
        for (int j = 0; j <= N; ++j)
          c.terms.push_back({1.0, e(i, j, 1, st, r), x(i, j, 1, st, r)});
      add(std::move(c));
    }
  for (int h = 2; h <= H; ++h)
    for (int st = 1; st <= S; ++st)
      for (int r = 1; r <= M; ++r) {
        MinlpModel::Constraint c{"payload_step" + idx({h, st, r}), {}, "=", 0.0, 0, 0};
        c.terms.push_back({1.0, cv(h, st, r), ""});
        c.terms.push_back({-1.0, cv(h - 1, st, r), ""});
        for (int i = 0; i <= N; ++i)
          for (int j = 0; j <= N; ++j)
            c.terms.push_back({1.0, e(i, j, h, st, r), x(i, j, h, st, r)});
        add(std::move(c));
      }

  // Demand met never exceeds the actual demand; all demand met by the end.
  for (int j = 1; j <= N; ++j)
    for (int h = 1; h <= H; ++h)
      for (int st = 1; st <= S; ++st)
        add({"demand_cap" + idx({j, h, st}),
             {{1.0, wv(j, h, st), ""}},
             "<=",
             m.nodes[j].demand,
             0,
             0});
  for (int j = 1; j <= N; ++j)
    add({"demand_final" + idx({j}),
         {{1.0, wv(j, H, S), ""}},
         "=",
         m.nodes[j].demand,
         0,
         0});

  // Travel time and completion time per task.
  for (int i = 0; i <= N; ++i)
    for (int j = 0; j <= N; ++j)
      for (int h = 1; h <= H; ++h)
        for (int st = 1; st <= S; ++st)
          for (int r = 1; r <= M; ++r) {
            MinlpModel::Constraint c{"travel_time" + idx({i, j, h, st, r}), {}, "=", 0.0,
                                     0, 0};
            c.terms.push_back({1.0, tv(i, j, h, st, r), ""});
            c.terms.push_back({-travel(i, j), x(i, j, h, st, r), ""});
            add(std::move(c));
          }
  for (int j = 1; j <= N; ++j) {
    MinlpModel::Constraint c{"completion_time" + idx({j}), {}, "=", 0.0, 0, 0};
    c.terms.push_back({1.0, "tdone" + idx({j}), ""});
    for (int i = 0; i <= N; ++i)
      for (int h = 1; h <= H; ++h)
        for (int st = 1; st <= S; ++st)
          for (int r = 1; r <= M; ++r) c.terms.push_back({-1.0, tv(i, j, h, st, r), ""});
    add(std::move(c));
  }
  for (int j = 1; j <= N; ++j)
    m.indicators.push_back({"completion_rule" + idx({j}), "done" + idx({j}),
                            "tdone" + idx({j}), m.nodes[j].deadline});

  for (int j = 1; j <= N; ++j)
    m.objective.push_back({1.0 / N, "done" + idx({j}), ""});
  m.objective_constant = -1.0;
  return m;
}

namespace {

void write_terms(std::ostream& os, const std::vector<MinlpModel::Term>& terms) {
  for (const auto& t : terms) {
    os << (t.coeff < 0 ? " - " : " + ") << fmt(std::abs(t.coeff)) << " " << t.a;
    if (!t.b.empty()) os << "*" << t.b;
  }
}

}  // namespace

std::string minlp_to_string(const MinlpModel& m) {
  std::ostringstream os;
  os << "mrta-ct-minlp v1\n";
  os << "dim N " << m.n_tasks << "\n";
  os << "dim M " << m.n_robots << "\n";
  os << "dim S " << m.tours << "\n";
  os << "dim H " << m.decisions << "\n";
  os << "param Cmax " << fmt(m.max_payload) << "\n";
  os << "param Dmax " << fmt(m.max_range) << "\n";
  os << "param speed " << fmt(m.speed) << "\n";
  for (const auto& n : m.nodes)
    os << "node " << n.id << " " << fmt(n.x) << " " << fmt(n.y) << " " << fmt(n.deadline)
       << " " << fmt(n.demand) << "\n";
  for (const auto& [name, kind] : m.variables)
    os << "var " << name << " " << (kind == 'b' ? "bin" : "cont") << "\n";
  os << "obj max";
  write_terms(os, m.objective);
  os << "\n";
  os << "objconst " << fmt(m.objective_constant) << "\n";
  for (const auto& c : m.constraints) {
    os << "con " << c.name << " :";
    write_terms(os, c.terms);
    if (c.rel == "in")
      os << " in [" << fmt(c.lo) << ", " << fmt(c.hi) << "]";
    else
      os << " " << c.rel << " " << fmt(c.rhs);
    os << "\n";
  }
  for (const auto& i : m.indicators)
    os << "ind " << i.name << " : " << i.flag << " <- " << i.expr << " <= " << fmt(i.rhs)
       << "\n";
  return os.str();
}

namespace {

std::vector<MinlpModel::Term> parse_terms(std::istringstream& is, std::string& pending,
                                          int line_no) {
  // Terms look like: + COEFF var[..] or - COEFF var[..]*var[..]
  std::vector<MinlpModel::Term> terms;
  std::string sign;
  while (is >> sign) {
    if (sign != "+" && sign != "-") {
      pending = sign;  // not a term: hand the token back to the caller
      return terms;
    }
    double coeff;
    std::string var;
    if (!(is >> coeff >> var))
      throw std::runtime_error("bad term at line " + std::to_string(line_no));
    MinlpModel::Term t;
    t.coeff = sign == "-" ? -coeff : coeff;
    const size_t star = var.find('*');
    if (star != std::string::npos) {
      t.a = var.substr(0, star);
      t.b = var.substr(star + 1);
    } else {
      t.a = var;
    }
    terms.push_back(std::move(t));
  }
  pending.clear();
  return terms;
}

}  // namespace

MinlpModel minlp_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line) || line != "mrta-ct-minlp v1")
    throw std::runtime_error("unrecognized model header");
  ++line_no;

  MinlpModel m;
  bool have_obj = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string kw;
    is >> kw;
    if (kw == "dim") {
      std::string which;
      int v;
      is >> which >> v;
      if (which == "N") m.n_tasks = v;
      else if (which == "M") m.n_robots = v;
      else if (which == "S") m.tours = v;
      else if (which == "H") m.decisions = v;
      else throw std::runtime_error("unknown dim at line " + std::to_string(line_no));
    } else if (kw == "param") {
      std::string which;
      double v;
      is >> which >> v;
      if (which == "Cmax") m.max_payload = v;
      else if (which == "Dmax") m.max_range = v;
      else if (which == "speed") m.speed = v;
      else throw std::runtime_error("unknown param at line " + std::to_string(line_no));
    } else if (kw == "node") {
      MinlpModel::Node n;
      if (!(is >> n.id >> n.x >> n.y >> n.deadline >> n.demand))
        throw std::runtime_error("bad node at line " + std::to_string(line_no));
      m.nodes.push_back(n);
    } else if (kw == "var") {
      std::string name, kind;
      is >> name >> kind;
      m.variables.emplace_back(name, kind == "bin" ? 'b' : 'c');
    } else if (kw == "obj") {
      std::string dir;
      is >> dir;
      if (dir != "max") throw std::runtime_error("objective must be max");
      std::string pending;
      m.objective = parse_terms(is, pending, line_no);
      if (!pending.empty())
        throw std::runtime_error("unexpected token in objective at line " +
                                 std::to_string(line_no));
      have_obj = true;
    } else if (kw == "objconst") {
      if (!(is >> m.objective_constant))
        throw std::runtime_error("bad objconst at line " + std::to_string(line_no));
    } else if (kw == "con") {
      MinlpModel::Constraint c;
      std::string colon;
      is >> c.name >> colon;
      if (colon != ":") throw std::runtime_error("bad constraint at line " + std::to_string(line_no));
      std::string pending;
      c.terms = parse_terms(is, pending, line_no);
      if (pending == "in") {
        c.rel = "in";
        std::string lo_s, hi_s;
        is >> lo_s >> hi_s;  // "[lo," "hi]"
        c.lo = std::stod(lo_s.substr(1));
        c.hi = std::stod(hi_s);
      } else if (pending == "=" || pending == "<=" || pending == ">=") {
        c.rel = pending;
        if (!(is >> c.rhs))
          throw std::runtime_error("missing rhs at line " + std::to_string(line_no));
      } else {
        throw std::runtime_error("bad relation at line " + std::to_string(line_no));
      }
      m.constraints.push_back(std::move(c));
    } else if (kw == "ind") {
      MinlpModel::Indicator i;
      std::string colon, arrow, le;
      is >> i.name >> colon >> i.flag >> arrow >> i.expr >> le >> i.rhs;
      if (colon != ":" || arrow != "<-" || le != "<=")
        throw std::runtime_error("bad indicator at line " + std::to_string(line_no));
      m.indicators.push_back(std::move(i));
    } else {
      throw std::runtime_error("unknown keyword '" + kw + "' at line " +
                               std::to_string(line_no));
    }
  }
  if (!have_obj) throw std::runtime_error("model has no objective");
  return m;
}

void export_minlp(const Scenario& s, int tours, int decisions, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << minlp_to_string(build_minlp(s, tours, decisions));
  if (!out) throw std::runtime_error("write failed: " + path);
}

MinlpModel load_minlp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return minlp_from_string(buf.str());
}

// --- trace validation ---

namespace {

struct Tour {
  std::vector<LegRecord> legs;
};

}  // namespace

void observed_bounds(const EventLog& log, const Scenario& s, int& tours, int& decisions) {
  tours = 1;
  decisions = 1;
  for (int r = 0; r < s.fleet.robot_count; ++r) {
    int t = 0, d = 0, dmax = 0;
    for (const LegRecord& l : log) {
      if (l.robot != r) continue;
      ++d;
      dmax = std::max(dmax, d);
      if (l.to_node == kDepotNode) {
        ++t;
        d = 0;
      }
    }
    if (d > 0) ++t;  // trailing unfinished tour
    tours = std::max(tours, t);
    decisions = std::max(decisions, dmax);
  }
}

TraceReport trace_validate(const EventLog& log, const Scenario& s, int tours,
                           int decisions) {
  constexpr double kTol = 1e-9;
  TraceReport rep;
  const int m = s.fleet.robot_count;

  auto dist = [&](int i, int j) {
    const double xi = i == 0 ? s.depot_x : s.tasks[i - 1].x;
    const double yi = i == 0 ? s.depot_y : s.tasks[i - 1].y;
    const double xj = j == 0 ? s.depot_x : s.tasks[j - 1].x;
    const double yj = j == 0 ? s.depot_y : s.tasks[j - 1].y;
    return std::hypot(xi - xj, yi - yj);
  };

  // Map each robot's legs onto (tour, decision) slots.
  std::vector<std::vector<Tour>> per_robot(m);
  for (const LegRecord& l : log) {
    if (l.robot < 0 || l.robot >= m) {
      rep.mappable = false;
      rep.mapping_error = "leg references unknown robot " + std::to_string(l.robot);
      return rep;
    }
    auto& tours_r = per_robot[l.robot];
    if (tours_r.empty() || (!tours_r.back().legs.empty() &&
                            tours_r.back().legs.back().to_node == kDepotNode))
      tours_r.push_back({});
    tours_r.back().legs.push_back(l);
  }
  for (int r = 0; r < m; ++r) {
    if (static_cast<int>(per_robot[r].size()) > tours) {
      rep.mappable = false;
      rep.mapping_error = "robot " + std::to_string(r) + " uses " +
                          std::to_string(per_robot[r].size()) + " tours, bound is " +
                          std::to_string(tours);
      return rep;
    }
    for (const Tour& t : per_robot[r])
      if (static_cast<int>(t.legs.size()) > decisions) {
        rep.mappable = false;
        rep.mapping_error = "robot " + std::to_string(r) + " makes " +
                            std::to_string(t.legs.size()) + " decisions in one tour, bound is " +
                            std::to_string(decisions);
        return rep;
      }
  }

  auto flag = [&rep](const std::string& family, const std::string& indices,
                     const std::string& detail) {
    rep.violations.push_back({family, indices, detail});
  };

  for (int r = 0; r < m; ++r) {
    double prev_arrive = 0.0;
    for (size_t st = 0; st < per_robot[r].size(); ++st) {
      const Tour& tour = per_robot[r][st];
      double range = s.fleet.max_range_km;
      double payload = s.fleet.max_payload_kg;
      int at = kDepotNode;
      for (size_t h = 0; h < tour.legs.size(); ++h) {
        const LegRecord& l = tour.legs[h];
        const std::string ix = idx({static_cast<int>(h) + 1, static_cast<int>(st) + 1, r + 1});
        if (h == 0 && l.from_node != kDepotNode)
          flag("tour_start", idx({static_cast<int>(st) + 1, r + 1}),
               "tour does not depart from the depot");
        if (l.from_node != at)
          flag("continuity", ix,
               "leg starts at node " + std::to_string(l.from_node) + ", robot is at " +
                   std::to_string(at));
        if (l.depart + kTol < prev_arrive)
          flag("travel_time", ix, "leg departs before the previous arrival");
        const double d = dist(l.from_node, l.to_node);
        const double expect = d * 1000.0 / s.fleet.speed_mps;
        if (std::abs((l.arrive - l.depart) - expect) > 1e-6)
          flag("travel_time", ix, "leg duration does not match distance/speed");
        prev_arrive = l.arrive;

        if (l.to_node == kDepotNode) {
          range -= d;
          if (range < -kTol)
            flag("range_bounds", ix, "range overdraft of " + std::to_string(-range) + " km");
          range = s.fleet.max_range_km;
          payload = s.fleet.max_payload_kg;
          if (l.delivered_kg != 0.0)
            flag("work_bounds", ix, "delivery recorded at the depot");
        } else {
          range -= d;
          if (range < -kTol)
            flag("range_bounds", ix, "range overdraft of " + std::to_string(-range) + " km");
          if (l.delivered_kg < -kTol || l.delivered_kg > s.fleet.max_payload_kg + kTol)
            flag("work_bounds", ix, "delivered kg outside [0, Cmax]");
          if (l.delivered_kg > payload + kTol)
            flag("work_within_payload", ix, "delivered more than remaining payload");
          payload -= l.delivered_kg;
          if (payload < -kTol)
            flag("payload_bounds", ix, "payload below zero");
        }
        at = l.to_node;
      }
      if (!tour.legs.empty() && tour.legs.back().to_node != kDepotNode &&
          st + 1 == per_robot[r].size())
        flag("tour_end", idx({static_cast<int>(st) + 1, r + 1}),
             "final tour does not return to the depot");
    }
  }

  // Demand ledger in global arrival order; the all-demand-met family is
  // enforced in its <= direction only.
  EventLog sorted = log;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const LegRecord& a, const LegRecord& b) { return a.arrive < b.arrive; });
  std::vector<double> met(s.task_count(), 0.0);
  std::vector<double> done_at(s.task_count(), -1.0);
  for (const LegRecord& l : sorted) {
    if (l.to_node == kDepotNode || l.delivered_kg <= 0.0) continue;
    const int j = l.to_node - 1;
    met[j] += l.delivered_kg;
    if (met[j] > s.tasks[j].demand_kg + kTol)
      flag("demand_cap", idx({j + 1}), "cumulative delivery exceeds the task demand");
    if (met[j] >= s.tasks[j].demand_kg - kTol && done_at[j] < 0.0) done_at[j] = l.arrive;
  }

  for (int j = 0; j < s.task_count(); ++j)
    if (done_at[j] >= 0.0 && done_at[j] <= s.tasks[j].deadline_s) ++rep.n_success;
  return rep;
}

}  // namespace ctp
