#include "scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rng.hpp"

namespace ctp {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void Scenario::validate() const {
  if (tasks.empty()) throw std::invalid_argument("empty task list");
  if (fleet.robot_count < 1) throw std::invalid_argument("robot count must be >= 1");
  if (fleet.max_payload_kg <= 0 || fleet.max_range_km <= 0 || fleet.speed_mps <= 0 ||
      fleet.comm_range_m <= 0)
    throw std::invalid_argument("fleet parameters must be strictly positive");
  if (arena_w_km <= 0 || arena_h_km <= 0)
    throw std::invalid_argument("arena dimensions must be strictly positive");
  if (depot_x < 0 || depot_x > arena_w_km || depot_y < 0 || depot_y > arena_h_km)
    throw std::invalid_argument("depot outside arena");

  std::vector<char> seen(tasks.size(), 0);
  for (const TaskSpec& t : tasks) {
    if (t.id < 1 || t.id > task_count() || seen[t.id - 1])
      throw std::invalid_argument("task ids are not a permutation of 1..N");
    seen[t.id - 1] = 1;
    if (t.x < 0 || t.x > arena_w_km || t.y < 0 || t.y > arena_h_km)
      throw std::invalid_argument("task " + std::to_string(t.id) + " outside arena");
    if (t.deadline_s <= 0)
      throw std::invalid_argument("task " + std::to_string(t.id) + " deadline must be > 0");
    if (t.demand_kg <= 0)
      throw std::invalid_argument("task " + std::to_string(t.id) + " demand must be > 0");
  }
}

Scenario generate_scenario(const GenerationConfig& cfg, uint64_t seed) {
  if (cfg.lambda_t <= 0 || cfg.lambda_r <= 0)
    throw std::invalid_argument("scale factors must be strictly positive");
  const int n = cfg.task_count();
  if (n < 1) throw std::invalid_argument("task scale factor yields an empty task list");

  Scenario s;
  s.seed = seed;
  s.arena_w_km = cfg.arena_w_km;
  s.arena_h_km = cfg.arena_h_km;
  s.depot_x = cfg.arena_w_km / 2.0;
  s.depot_y = cfg.arena_h_km / 2.0;
  s.fleet = cfg.fleet;
  s.fleet.robot_count = cfg.robot_count();

  Rng rng(seed);
  s.tasks.reserve(n);
  for (int i = 1; i <= n; ++i) {
    TaskSpec t;
    t.id = i;
    t.x = rng.uniform(0.0, cfg.arena_w_km);
    t.y = rng.uniform(0.0, cfg.arena_h_km);
    t.deadline_s = rng.uniform(cfg.deadline_min_s, cfg.deadline_max_s);
    t.demand_kg = rng.uniform(cfg.demand_min_kg, cfg.demand_max_kg);
    s.tasks.push_back(t);
  }
  s.validate();
  return s;
}

std::string scenario_to_string(const Scenario& s) {
  std::ostringstream os;
  os << "ctsc v1\n";
  os << "seed " << s.seed << "\n";
  os << "tasks " << s.task_count() << "\n";
  os << "robots " << s.fleet.robot_count << "\n";
  os << "arena " << fmt_double(s.arena_w_km) << " " << fmt_double(s.arena_h_km) << "\n";
  os << "depot " << fmt_double(s.depot_x) << " " << fmt_double(s.depot_y) << "\n";
  os << "fleet payload " << fmt_double(s.fleet.max_payload_kg) << " range "
     << fmt_double(s.fleet.max_range_km) << " speed " << fmt_double(s.fleet.speed_mps)
     << " comm " << fmt_double(s.fleet.comm_range_m) << "\n";
  for (const TaskSpec& t : s.tasks) {
    os << "task " << t.id << " " << fmt_double(t.x) << " " << fmt_double(t.y) << " "
       << fmt_double(t.deadline_s) << " " << fmt_double(t.demand_kg) << "\n";
  }
  return os.str();
}

namespace {

struct LineReader {
  std::istringstream in;
  int line_no = 0;
  std::string current;

  explicit LineReader(const std::string& text) : in(text) {}

  bool next() {
    while (std::getline(in, current)) {
      ++line_no;
      if (!current.empty() && current.back() == '\r') current.pop_back();
      if (!current.empty()) return true;
    }
    return false;
  }
};

template <typename T>
T parse_value(std::istringstream& is, LineReader& r, const char* what) {
  T v;
  if (!(is >> v)) throw ParseError(std::string("expected ") + what, r.line_no);
  return v;
}

void expect_word(std::istringstream& is, LineReader& r, const std::string& word) {
  std::string w;
  if (!(is >> w) || w != word)
    throw ParseError("expected keyword '" + word + "'", r.line_no);
}

}  // namespace

Scenario scenario_from_string(const std::string& text) {
  LineReader r(text);
  if (!r.next()) throw ParseError("empty file", 0);
  if (r.current != "ctsc v1") throw ParseError("unrecognized header, want 'ctsc v1'", r.line_no);

  Scenario s;
  int declared_tasks = -1;

  auto line_stream = [&](const std::string& keyword) {
    std::istringstream is(r.current);
    expect_word(is, r, keyword);
    return is;
  };

  if (!r.next()) throw ParseError("truncated file: missing seed", r.line_no);
  {
    auto is = line_stream("seed");
    s.seed = parse_value<uint64_t>(is, r, "seed value");
  }
  if (!r.next()) throw ParseError("truncated file: missing task count", r.line_no);
  {
    auto is = line_stream("tasks");
    declared_tasks = parse_value<int>(is, r, "task count");
    if (declared_tasks <= 0) throw ParseError("empty task list", r.line_no);
  }
  if (!r.next()) throw ParseError("truncated file: missing robot count", r.line_no);
  {
    auto is = line_stream("robots");
    s.fleet.robot_count = parse_value<int>(is, r, "robot count");
  }
  if (!r.next()) throw ParseError("truncated file: missing arena", r.line_no);
  {
    auto is = line_stream("arena");
    s.arena_w_km = parse_value<double>(is, r, "arena width");
    s.arena_h_km = parse_value<double>(is, r, "arena height");
  }
  if (!r.next()) throw ParseError("truncated file: missing depot", r.line_no);
  {
    auto is = line_stream("depot");
    s.depot_x = parse_value<double>(is, r, "depot x");
    s.depot_y = parse_value<double>(is, r, "depot y");
  }
  if (!r.next()) throw ParseError("truncated file: missing fleet", r.line_no);
  {
    auto is = line_stream("fleet");
    expect_word(is, r, "payload");
    s.fleet.max_payload_kg = parse_value<double>(is, r, "payload");
    expect_word(is, r, "range");
    s.fleet.max_range_km = parse_value<double>(is, r, "range");
    expect_word(is, r, "speed");
    s.fleet.speed_mps = parse_value<double>(is, r, "speed");
    expect_word(is, r, "comm");
    s.fleet.comm_range_m = parse_value<double>(is, r, "comm range");
  }

  for (int i = 0; i < declared_tasks; ++i) {
    if (!r.next())
      throw ParseError("truncated file: expected " + std::to_string(declared_tasks) +
                           " task records, got " + std::to_string(i),
                       r.line_no);
    auto is = line_stream("task");
    TaskSpec t;
    t.id = parse_value<int>(is, r, "task id");
    t.x = parse_value<double>(is, r, "task x");
    t.y = parse_value<double>(is, r, "task y");
    t.deadline_s = parse_value<double>(is, r, "task deadline");
    t.demand_kg = parse_value<double>(is, r, "task demand");
    s.tasks.push_back(t);
  }
  if (r.next()) throw ParseError("trailing content after task records", r.line_no);

  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), r.line_no);
  }
  return s;
}

void save_scenario(const Scenario& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << scenario_to_string(s);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return scenario_from_string(buf.str());
}

NormalizationTable normalize_features(const Scenario& s) {
  NormalizationTable t;
  t.x = {0.0, s.arena_w_km, s.arena_w_km == 0.0};
  t.y = {0.0, s.arena_h_km, s.arena_h_km == 0.0};

  double dl_lo = s.tasks.front().deadline_s, dl_hi = dl_lo;
  double dm_lo = s.tasks.front().demand_kg, dm_hi = dm_lo;
  for (const TaskSpec& task : s.tasks) {
    dl_lo = std::min(dl_lo, task.deadline_s);
    dl_hi = std::max(dl_hi, task.deadline_s);
    dm_lo = std::min(dm_lo, task.demand_kg);
    dm_hi = std::max(dm_hi, task.demand_kg);
  }
  t.deadline = {dl_lo, dl_hi, dl_lo == dl_hi};
  t.demand = {dm_lo, dm_hi, dm_lo == dm_hi};
  return t;
}

uint64_t scenario_hash(const Scenario& s) {
  const std::string text = scenario_to_string(s);
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace ctp
