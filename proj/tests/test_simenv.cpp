#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <map>

#include "baselines.hpp"
#include "rng.hpp"
#include "scenario.hpp"
#include "simenv.hpp"

using namespace ctp;

namespace {

std::shared_ptr<const Scenario> make_scenario(std::vector<TaskSpec> tasks, int robots,
                                              double depot_x = 0.0, double depot_y = 0.0,
                                              double arena = 3.0, double comm_m = 100.0) {
  Scenario s;
  s.tasks = std::move(tasks);
  s.fleet.robot_count = robots;
  s.fleet.comm_range_m = comm_m;
  s.depot_x = depot_x;
  s.depot_y = depot_y;
  s.arena_w_km = arena;
  s.arena_h_km = arena;
  return std::make_shared<const Scenario>(s);
}

// Drives an episode with uniformly random feasible actions.
WorldState run_random(std::shared_ptr<const Scenario> s, uint64_t seed) {
  WorldState w = WorldState::reset(std::move(s), seed);
  Rng rng(seed);
  while (auto who = w.advance_to_decision()) w.apply_action(*who, feasrnd_action(w, *who, rng));
  return w;
}

}  // namespace

TEST_CASE("reset state") {
  GenerationConfig cfg;  // N=50, M=7
  auto s = std::make_shared<const Scenario>(generate_scenario(cfg, 5));
  WorldState w = WorldState::reset(s, 5);

  SUBCASE("demand conservation at start") {
    double total = 0.0, expect = 0.0;
    for (int i = 0; i < s->task_count(); ++i) {
      total += w.tasks()[i].remaining_kg;
      expect += s->tasks[i].demand_kg;
    }
    CHECK(total == expect);
  }

  SUBCASE("beliefs start at timestamp zero") {
    for (int r = 0; r < 7; ++r)
      for (int k = 0; k < 7; ++k) {
        CHECK(w.belief(r).robots[k].stamp == 0.0);
        CHECK(w.belief(r).robots[k].seq == 0);
      }
  }

  SUBCASE("one decision event per robot at t=0") {
    std::vector<int> deciders;
    for (int i = 0; i < 7; ++i) {
      auto who = w.advance_to_decision();
      REQUIRE(who);
      CHECK(w.time() == 0.0);
      deciders.push_back(*who);
      w.apply_action(*who, kDepotNode);  // park everyone immediately
    }
    // Simultaneous events resolve by robot id.
    CHECK(deciders == std::vector<int>{0, 1, 2, 3, 4, 5, 6});
  }
}

TEST_CASE("feasible mask") {
  SUBCASE("payload zero leaves only the depot") {
    // One task with demand >= payload drains the robot on arrival.
    auto s = make_scenario({{1, 0.1, 0.0, 1000.0, 8.0}}, 1);
    WorldState w = WorldState::reset(s, 1);
    auto who = w.advance_to_decision();
    REQUIRE(who);
    w.apply_action(*who, 1);
    who = w.advance_to_decision();  // at the task, payload now 0
    REQUIRE(who);
    const auto mask = w.feasible_mask(0);
    CHECK(mask[0]);
    CHECK_FALSE(mask[1]);
    CHECK(w.robots()[0].payload_kg == 0.0);
  }

  SUBCASE("all tasks done leaves only the depot") {
    auto s = make_scenario({{1, 0.1, 0.0, 1000.0, 2.0}, {2, 0.0, 0.1, 1000.0, 2.0}}, 1);
    WorldState w = run_random(s, 3);
    CHECK(w.is_terminal());
    CHECK(w.count_success() == 2);
    const auto mask = w.feasible_mask(0);
    CHECK(mask[0]);
    CHECK_FALSE(mask[1]);
    CHECK_FALSE(mask[2]);
  }

  SUBCASE("round-trip range excludes the far task") {
    // From the depot: task 1 round trip = 1.0 km <= 4; task 2 = 5.0 km > 4.
    auto s = make_scenario({{1, 0.3, 0.4, 1000.0, 1.0}, {2, 1.5, 2.0, 1000.0, 1.0}}, 1);
    WorldState w = WorldState::reset(s, 1);
    auto who = w.advance_to_decision();
    REQUIRE(who);
    const auto mask = w.feasible_mask(0);
    CHECK(mask[0]);
    CHECK(mask[1]);
    CHECK_FALSE(mask[2]);
  }
}

TEST_CASE("delivery follows the min rule") {
  SUBCASE("payload 5 vs demand 3") {
    auto s = make_scenario({{1, 0.1, 0.0, 1000.0, 3.0}}, 1);
    WorldState w = WorldState::reset(s, 1);
    auto who = w.advance_to_decision();
    w.apply_action(*who, 1);
    who = w.advance_to_decision();
    REQUIRE(who);
    CHECK(w.tasks()[0].status == TaskStatus::Done);
    CHECK(w.tasks()[0].remaining_kg == 0.0);
    CHECK(w.robots()[0].payload_kg == 2.0);
  }
  SUBCASE("payload 5 vs demand 8") {
    auto s = make_scenario({{1, 0.1, 0.0, 1000.0, 8.0}}, 1);
    WorldState w = WorldState::reset(s, 1);
    auto who = w.advance_to_decision();
    w.apply_action(*who, 1);
    who = w.advance_to_decision();
    REQUIRE(who);
    CHECK(w.tasks()[0].status == TaskStatus::Active);
    CHECK(w.tasks()[0].remaining_kg == 3.0);
    CHECK(w.robots()[0].payload_kg == 0.0);
  }
}

TEST_CASE("kinematics: 1 km at 10 m/s takes 100 s and costs 1 km of range") {
  auto s = make_scenario({{1, 0.6, 0.8, 1000.0, 1.0}}, 1);
  WorldState w = WorldState::reset(s, 1);
  auto who = w.advance_to_decision();
  w.apply_action(*who, 1);
  who = w.advance_to_decision();
  REQUIRE(who);
  CHECK(w.time() == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(w.robots()[0].range_km == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("delivery at exactly the deadline counts") {
  // Travel time is exactly 100 s; deadline 100 s.
  auto s = make_scenario({{1, 0.6, 0.8, 100.0, 1.0}}, 1);
  WorldState w = run_random(s, 1);
  CHECK(w.count_success() == 1);
  CHECK(w.tasks()[0].completion_time == doctest::Approx(100.0));
}

TEST_CASE("deadline expiry marks tasks missed") {
  // Unreachable in time: deadline 50 s but travel takes 100 s.
  auto s = make_scenario({{1, 0.6, 0.8, 50.0, 1.0}}, 1);
  WorldState w = run_random(s, 1);
  CHECK(w.is_terminal());
  CHECK(w.tasks()[0].status == TaskStatus::Missed);
  CHECK(w.compute_reward() == doctest::Approx(-1.0));
}

TEST_CASE("terminal reward values") {
  SUBCASE("all done gives 0") {
    auto s = make_scenario({{1, 0.1, 0.0, 1000.0, 2.0}}, 1);
    WorldState w = run_random(s, 2);
    CHECK(w.compute_reward() == 0.0);
  }
  SUBCASE("four of five done gives -0.2") {
    // Task 5 is out of range entirely (round trip 5 km > 4 km).
    std::vector<TaskSpec> tasks = {{1, 0.1, 0.0, 4000.0, 2.0},
                                   {2, 0.0, 0.1, 4000.0, 2.0},
                                   {3, 0.1, 0.1, 4000.0, 2.0},
                                   {4, 0.2, 0.0, 4000.0, 2.0},
                                   {5, 1.5, 2.0, 4000.0, 2.0}};
    WorldState w = run_random(make_scenario(std::move(tasks), 1), 4);
    CHECK(w.is_terminal());
    CHECK(w.count_success() == 4);
    CHECK(w.compute_reward() == doctest::Approx(-0.2).epsilon(1e-12));
  }
  SUBCASE("pre-terminal reward call is a contract violation") {
    auto s = make_scenario({{1, 0.1, 0.0, 1000.0, 2.0}}, 1);
    WorldState w = WorldState::reset(s, 1);
    CHECK_THROWS_AS(w.compute_reward(), std::logic_error);
  }
}

TEST_CASE("is_terminal cases") {
  auto s = make_scenario({{1, 0.1, 0.0, 1000.0, 2.0}}, 1);
  WorldState w = WorldState::reset(s, 1);
  CHECK_FALSE(w.is_terminal());

  auto who = w.advance_to_decision();
  w.apply_action(*who, 1);
  who = w.advance_to_decision();  // task done, robot at the task
  REQUIRE(who);
  CHECK_FALSE(w.is_terminal());  // still needs to get home
  w.apply_action(*who, kDepotNode);
  who = w.advance_to_decision();  // at depot, nothing feasible -> decides again
  REQUIRE(who);
  CHECK_FALSE(w.is_terminal());
  w.apply_action(*who, kDepotNode);  // docks
  CHECK_FALSE(w.advance_to_decision().has_value());
  CHECK(w.is_terminal());
}

TEST_CASE("infeasible action is rejected") {
  auto s = make_scenario({{1, 1.5, 2.0, 1000.0, 2.0}}, 1);  // out of range
  WorldState w = WorldState::reset(s, 1);
  auto who = w.advance_to_decision();
  REQUIRE(who);
  CHECK_THROWS_AS(w.apply_action(*who, 1), std::logic_error);
}

TEST_CASE("information exchange") {
  SUBCASE("same-instant publication propagates to later deciders in range") {
    auto s = make_scenario({{1, 0.1, 0.0, 1000.0, 1.0}, {2, 0.0, 0.1, 1000.0, 1.0}}, 2);
    WorldState w = WorldState::reset(s, 1);
    auto who = w.advance_to_decision();
    REQUIRE(*who == 0);
    w.apply_action(0, 1);
    who = w.advance_to_decision();
    REQUIRE(*who == 1);
    // Robot 1 exchanged with co-located robot 0 before deciding.
    CHECK(w.belief(1).robots[0].dest_x == s->tasks[0].x);
    CHECK(w.belief(1).robots[0].dest_y == s->tasks[0].y);
  }

  SUBCASE("separation exactly at the threshold does not exchange") {
    // Robot 0 docks at the depot; robot 1 parks on a task exactly 100 m away.
    auto s = make_scenario({{1, 0.1, 0.0, 1000.0, 8.0}}, 2, 0.0, 0.0, 3.0, 100.0);
    WorldState w = WorldState::reset(s, 1);
    auto who = w.advance_to_decision();
    REQUIRE(*who == 0);
    w.apply_action(0, kDepotNode);  // docks immediately
    who = w.advance_to_decision();
    REQUIRE(*who == 1);
    w.apply_action(1, 1);
    who = w.advance_to_decision();  // robot 1 arrives, t=10, separation 100 m
    REQUIRE(*who == 1);
    CHECK(w.time() == doctest::Approx(10.0));
    // Strict inequality: no exchange happened, robot 0 still holds robot 1's
    // pre-decision record.
    CHECK(w.belief(0).robots[1].dest_x == s->depot_x);
    CHECK(w.belief(0).robots[1].seq < w.belief(1).robots[1].seq);
  }

  SUBCASE("chain merges are single-pass in ascending pair order") {
    // At t=10: r0 at (100,0) m; r1 at (60,80); r2 at (24.25, 97.01).
    // d(r0,r1)=89.4 < 100, d(r1,r2)=39.6 < 100, d(r0,r2)=123 > 100.
    std::vector<TaskSpec> tasks = {{1, 0.1, 0.0, 4000.0, 8.0},
                                   {2, 0.18, 0.24, 4000.0, 8.0},
                                   {3, 0.12, 0.48, 4000.0, 8.0}};
    auto s = make_scenario(std::move(tasks), 3);
    WorldState w = WorldState::reset(s, 1);
    for (int r = 0; r < 3; ++r) {
      auto who = w.advance_to_decision();
      REQUIRE(*who == r);
      w.apply_action(r, r + 1);
    }
    auto who = w.advance_to_decision();  // r0 arrives at task 1, t=10
    REQUIRE(*who == 0);
    CHECK(w.time() == doctest::Approx(10.0));
    // r0 heard about r2 only through r1, whose record predates r2's t=0
    // decision (everyone was still parked when r1 last met r2's row).
    CHECK(w.belief(0).robots[2].dest_x == s->depot_x);
    CHECK(w.belief(0).robots[2].seq < w.belief(2).robots[2].seq);
    // r1 met r2 after r0's merge in the same pass and now has the real move.
    CHECK(w.belief(1).robots[2].dest_x == s->tasks[2].x);
  }

  SUBCASE("co-located robots reach identical beliefs") {
    auto s = make_scenario({{1, 0.1, 0.0, 1000.0, 1.0}}, 2);
    WorldState w = WorldState::reset(s, 1);
    w.exchange_information();
    CHECK(w.belief(0).robots == w.belief(1).robots);
    CHECK(w.belief(0).completion == w.belief(1).completion);
  }
}

TEST_CASE("full communication keeps every belief current") {
  GenerationConfig cfg;
  cfg.lambda_t = 0.2;  // N=10, M=2
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Scenario plain = generate_scenario(cfg, 100 + seed);
    plain.fleet.comm_range_m = 1e12;
    auto s = std::make_shared<const Scenario>(plain);
    WorldState w = WorldState::reset(s, seed);
    Rng rng(seed);
    while (auto who = w.advance_to_decision()) {
      for (int r = 0; r < s->fleet.robot_count; ++r)
        for (int k = 0; k < s->fleet.robot_count; ++k)
          CHECK(w.belief(r).robots[k] == w.belief(k).robots[k]);
      for (int r = 0; r < s->fleet.robot_count; ++r)
        for (int i = 0; i < s->task_count(); ++i) {
          const double truth =
              1.0 - w.tasks()[i].remaining_kg / s->tasks[i].demand_kg;
          CHECK(w.belief(r).completion[i] == truth);
        }
      w.apply_action(*who, feasrnd_action(w, *who, rng));
    }
  }
}

TEST_CASE("belief rows are always some true past state of their subject") {
  GenerationConfig cfg;
  cfg.lambda_t = 0.3;
  cfg.lambda_r = 1.0;  // N=15, M=int(6*.3)+1=2
  auto s = std::make_shared<const Scenario>(generate_scenario(cfg, 9));
  WorldState w = WorldState::reset(s, 9);
  Rng rng(9);
  std::map<int, std::vector<PeerRecord>> history;
  for (int r = 0; r < s->fleet.robot_count; ++r)
    history[r].push_back(w.belief(r).robots[r]);

  while (auto who = w.advance_to_decision()) {
    for (int r = 0; r < s->fleet.robot_count; ++r)
      history[r].push_back(w.belief(r).robots[r]);
    for (int r = 0; r < s->fleet.robot_count; ++r)
      for (int k = 0; k < s->fleet.robot_count; ++k) {
        const PeerRecord& rec = w.belief(r).robots[k];
        bool found = false;
        for (const PeerRecord& h : history[k]) found = found || h == rec;
        CHECK(found);
      }
    w.apply_action(*who, feasrnd_action(w, *who, rng));
    for (int r = 0; r < s->fleet.robot_count; ++r)
      history[r].push_back(w.belief(r).robots[r]);
  }
}

TEST_CASE("invariants along random episodes") {
  GenerationConfig cfg;
  cfg.lambda_t = 0.2;
  auto s = std::make_shared<const Scenario>(generate_scenario(cfg, 77));
  WorldState w = WorldState::reset(s, 77);
  Rng rng(77);
  double last_time = 0.0;
  double delivered_total = 0.0;
  while (auto who = w.advance_to_decision()) {
    CHECK(w.time() >= last_time);  // monotone clock
    last_time = w.time();
    for (const RobotState& r : w.robots()) {
      CHECK(r.range_km >= -1e-9);
      CHECK(r.range_km <= s->fleet.max_range_km + 1e-9);
      CHECK(r.payload_kg >= -1e-9);
      CHECK(r.payload_kg <= s->fleet.max_payload_kg + 1e-9);
    }
    // Demand conservation: log deliveries match the task states.
    delivered_total = 0.0;
    for (const LegRecord& l : w.log()) delivered_total += l.delivered_kg;
    double consumed = 0.0;
    for (int i = 0; i < s->task_count(); ++i)
      consumed += s->tasks[i].demand_kg - w.tasks()[i].remaining_kg;
    CHECK(delivered_total == doctest::Approx(consumed).epsilon(1e-9));
    w.apply_action(*who, feasrnd_action(w, *who, rng));
  }
}

TEST_CASE("exchange payload size and counters") {
  GenerationConfig cfg;  // N=50, M=7
  auto s = std::make_shared<const Scenario>(generate_scenario(cfg, 4));
  WorldState w = WorldState::reset(s, 4);
  CHECK(w.exchange_payload_bytes() == (6 * 7 + 50) * 8);
  w.exchange_information();  // all co-located at the depot: 21 pairs
  CHECK(w.comm_bytes_total() == 21 * 2 * w.exchange_payload_bytes());
}

TEST_CASE("event log replay reproduces the terminal reward") {
  GenerationConfig cfg;
  cfg.lambda_t = 0.2;
  for (uint64_t seed = 1; seed <= 8; ++seed) {
    auto s = std::make_shared<const Scenario>(generate_scenario(cfg, seed));
    WorldState w = run_random(s, seed);
    const ReplaySummary sum = replay_event_log(*s, w.log());
    CHECK(sum.n_success == w.count_success());
    CHECK(sum.reward == doctest::Approx(w.compute_reward()).epsilon(1e-12));
    CHECK(static_cast<long long>(w.log().size()) >= w.decisions());
  }
}

TEST_CASE("event log save/load round-trips") {
  GenerationConfig cfg;
  cfg.lambda_t = 0.1;
  auto s = std::make_shared<const Scenario>(generate_scenario(cfg, 12));
  WorldState w = run_random(s, 12);
  const auto path =
      (std::filesystem::temp_directory_path() / "ctp_log_roundtrip.ctlog").string();
  save_event_log(w.log(), path);
  const EventLog back = load_event_log(path);
  REQUIRE(back.size() == w.log().size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].robot == w.log()[i].robot);
    CHECK(back[i].from_node == w.log()[i].from_node);
    CHECK(back[i].to_node == w.log()[i].to_node);
    CHECK(back[i].depart == w.log()[i].depart);
    CHECK(back[i].arrive == w.log()[i].arrive);
    CHECK(back[i].delivered_kg == w.log()[i].delivered_kg);
  }
  std::filesystem::remove(path);
}

TEST_CASE("stale belief leads to a wasted trip that still terminates") {
  // Two robots, tiny comm range, one task: both may head to the same task;
  // the later one delivers nothing and must still come home.
  auto s = make_scenario({{1, 0.1, 0.0, 1000.0, 2.0}}, 2, 0.0, 0.0, 3.0, 1e-6);
  WorldState w = WorldState::reset(s, 1);
  auto who = w.advance_to_decision();
  w.apply_action(0, 1);
  who = w.advance_to_decision();
  REQUIRE(*who == 1);
  const auto mask = w.feasible_mask(1);
  CHECK(mask[1]);  // stale belief says the task is open
  w.apply_action(1, 1);
  while ((who = w.advance_to_decision())) w.apply_action(*who, kDepotNode);
  CHECK(w.is_terminal());
  CHECK(w.count_success() == 1);
  double delivered = 0.0;
  for (const LegRecord& l : w.log())
    if (l.robot == 1) delivered += l.delivered_kg;
  CHECK(delivered == 0.0);
}

TEST_CASE("observation carries the believed peer table, not ground truth") {
  // Tiny comm range: after leaving the depot the robots never hear each other.
  auto s = make_scenario({{1, 0.1, 0.0, 1000.0, 2.0}, {2, 0.0, 0.12, 1000.0, 2.0}}, 2,
                         0.0, 0.0, 3.0, 1e-6);
  WorldState w = WorldState::reset(s, 1);
  auto who = w.advance_to_decision();
  w.apply_action(0, 1);
  who = w.advance_to_decision();
  w.apply_action(1, 2);
  who = w.advance_to_decision();  // robot 0 arrives at task 1, t=10
  REQUIRE(*who == 0);
  w.apply_action(0, kDepotNode);  // robot 0 turns home
  who = w.advance_to_decision();  // robot 1 arrives at task 2, t=12
  REQUIRE(*who == 1);

  const Observation obs = w.observe(1);
  REQUIRE(obs.peers.size() == 2);
  CHECK(obs.peers[1] == obs.own);
  CHECK(obs.peers[0] == w.belief(1).robots[0]);
  // Robot 1 still holds robot 0's t=0 record (destination task 1); ground
  // truth has robot 0 already heading back to the depot.
  CHECK(obs.peers[0].stamp == 0.0);
  CHECK(obs.peers[0].dest_x == s->tasks[0].x);
  CHECK(w.robots()[0].dest_x == s->depot_x);
  // Items 9 and 10: next and last decision times are part of the view.
  CHECK(obs.peers[0].next_decision_time == doctest::Approx(10.0));
  CHECK(obs.peers[1].next_decision_time >= obs.peers[1].stamp);
}
