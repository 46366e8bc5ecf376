// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit status is the number of
// failed criteria. Artifacts (trained checkpoint, curves) are written under
// ./acceptance_artifacts.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "baselines.hpp"
#include "bench.hpp"
#include "minlp.hpp"
#include "oracles.hpp"
#include "policy.hpp"
#include "rng.hpp"
#include "scenario.hpp"
#include "simenv.hpp"
#include "stats.hpp"
#include "taskgraph.hpp"
#include "topology.hpp"
#include "training.hpp"

using namespace ctp;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Eigen::MatrixXd random_cloud(int n, int dim, uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd p(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) p(i, j) = rng.uniform();
  return p;
}

// ---- 1. topology oracle suite ----
Outcome topology_oracle_suite() {
  const double t0 = now_s();
  for (uint64_t i = 0; i < 200; ++i) {
    const int n = 2 + static_cast<int>(i % 7);  // up to 8 points
    const Eigen::MatrixXd p = random_cloud(n, i % 2 ? 2 : 4, 9000 + i);
    PersistenceDiagram ours = rips_persistence(p, 1);
    PersistenceDiagram naive = oracle::naive_rips_persistence(p, 1);
    for (int d = 0; d <= 1; ++d)
      if (!(ours.dims[d] == naive.dims[d]))
        return {false, fmt("pair mismatch on cloud %llu dim %d",
                           static_cast<unsigned long long>(i), d)};
  }
  Eigen::MatrixXd square(4, 2);
  square << 0, 0, 1, 0, 0, 1, 1, 1;
  const PersistenceDiagram pd = rips_persistence(square, 1);
  if (pd.at(1).size() != 1) return {false, "unit square: expected one loop"};
  const double be = std::abs(pd.at(1)[0].birth - 1.0);
  const double de = std::abs(pd.at(1)[0].death - std::sqrt(2.0));
  if (be > 1e-12 || de > 1e-12)
    return {false, fmt("unit square bar error birth %.2e death %.2e", be, de)};
  const double elapsed = now_s() - t0;
  if (elapsed >= 60.0) return {false, fmt("runtime %.1fs exceeds 60s", elapsed)};
  return {true, fmt("200 clouds exact; square bar err %.1e/%.1e; %.2fs", be, de, elapsed)};
}

// ---- 2. H0-MST equivalence ----
Outcome h0_mst_equivalence() {
  double worst = 0.0;
  for (uint64_t i = 0; i < 100; ++i) {
    const int n = 2 + static_cast<int>(i % 9);  // up to 10 points
    const Eigen::MatrixXd p = random_cloud(n, 2, 7000 + i);
    const PersistenceDiagram pd = rips_persistence(p, 0);
    std::vector<double> deaths;
    for (const auto& b : pd.at(0))
      if (!b.essential()) deaths.push_back(b.death);
    std::sort(deaths.begin(), deaths.end());
    const std::vector<double> mst = oracle::mst_edge_lengths(p);
    if (deaths.size() != mst.size())
      return {false, fmt("bar count %zu vs mst %zu", deaths.size(), mst.size())};
    for (size_t k = 0; k < mst.size(); ++k) {
      worst = std::max(worst, std::abs(deaths[k] - mst[k]));
      if (std::abs(deaths[k] - mst[k]) > 1e-9)
        return {false, fmt("death/mst gap %.2e", std::abs(deaths[k] - mst[k]))};
    }
  }
  return {true, fmt("100 clouds, worst |death-mst| = %.1e", worst)};
}

// ---- 3. wasserstein metric axioms ----
Outcome wasserstein_axioms() {
  TdConfig cfg;
  Rng rng(31337);
  auto draw = [&rng]() {
    std::vector<PersistencePair> d;
    const int n = static_cast<int>(rng.integer(5));
    for (int i = 0; i < n; ++i) {
      const double b = rng.uniform();
      d.push_back({b, b + rng.uniform() + 1e-3});
    }
    return d;
  };
  double worst_sym = 0.0, worst_tri = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto a = draw(), b = draw(), c = draw();
    const double ab = wasserstein_distance(a, b, cfg);
    const double ba = wasserstein_distance(b, a, cfg);
    const double aa = wasserstein_distance(a, a, cfg);
    const double ac = wasserstein_distance(a, c, cfg);
    const double cb = wasserstein_distance(c, b, cfg);
    worst_sym = std::max(worst_sym, std::abs(ab - ba));
    worst_tri = std::max(worst_tri, ab - (ac + cb));
    if (std::abs(ab - ba) > 1e-9) return {false, fmt("symmetry gap %.2e", ab - ba)};
    if (aa > 1e-9) return {false, fmt("self-distance %.2e", aa)};
    if (ab > ac + cb + 1e-9)
      return {false, fmt("triangle violated by %.2e", ab - ac - cb)};
  }
  const double one =
      wasserstein_distance({{1.0, 3.0}}, {}, cfg);
  const double two =
      wasserstein_distance({{0.0, 2.0}}, {{0.0, 4.0}}, cfg);
  if (one != 1.0 || two != 2.0)
    return {false, fmt("worked matchings: got %.17g and %.17g", one, two)};
  return {true, fmt("1000 triples; worked matchings exact; sym %.1e tri %.1e",
                    worst_sym, worst_tri)};
}

// ---- 4. encoder equivariance + decoder masking ----
Outcome equivariance_and_masking() {
  PolicyConfig cfg;
  cfg.hidden = 16;
  cfg.layers = 1;
  cfg.moments = 2;
  cfg.filter_degree = 1;
  cfg.heads = 4;
  cfg.context_hidden = 16;
  cfg.critic_hidden = 16;
  double worst = 0.0;
  Rng rng(1312);
  for (int g = 0; g < 100; ++g) {
    const int n = 2 + static_cast<int>(rng.integer(29));  // N <= 30
    const PolicyParams params = PolicyParams::init(cfg, 100 + g % 5);
    const Eigen::MatrixXd f = random_cloud(n, 4, 5000 + g);
    const TaskGraph graph = build_task_graph(f);

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.integer(static_cast<uint64_t>(i) + 1)]);

    PolicyWork w1;
    w1.reset(params);
    const Eigen::MatrixXd e1 = w1.tape.value(encode(w1, f, graph.laplacian));

    Eigen::MatrixXd pf(n, 4), pl(n, n);
    for (int i = 0; i < n; ++i) pf.row(i) = f.row(perm[i]);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) pl(i, j) = graph.laplacian(perm[i], perm[j]);
    PolicyWork w2;
    w2.reset(params);
    const Eigen::MatrixXd e2 = w2.tape.value(encode(w2, pf, pl));
    for (int i = 0; i < n; ++i)
      worst = std::max(worst, (e2.row(i) - e1.row(perm[i])).cwiseAbs().maxCoeff());
    if (worst >= 1e-6) return {false, fmt("equivariance deviation %.2e on graph %d", worst, g)};

    // Decoder: masked entries must be exactly zero.
    std::vector<uint8_t> mask(n + 1, 1);
    const int masked_count = static_cast<int>(rng.integer(n));
    for (int k = 0; k < masked_count; ++k) mask[1 + rng.integer(n)] = 0;
    Eigen::VectorXd ctx(9);
    for (int i = 0; i < 9; ++i) ctx(i) = rng.uniform();
    PolicyWork w3;
    w3.reset(params);
    const ForwardResult fr = policy_forward(w3, f, graph.laplacian, mask, ctx);
    const Eigen::MatrixXd probs = w3.tape.value(fr.probs);
    for (int j = 0; j <= n; ++j)
      if (!mask[j] && probs(0, j) != 0.0)
        return {false, fmt("masked prob %g at %d (graph %d)", probs(0, j), j, g)};
    if (std::abs(probs.sum() - 1.0) > 1e-9)
      return {false, fmt("probs sum %.12f", probs.sum())};
  }
  return {true, fmt("100 graphs (N<=30); worst equivariance deviation %.1e", worst)};
}

// ---- 5. gradient check ----
Outcome gradient_check() {
  auto check_variant = [](PolicyVariant variant, const std::vector<std::string>& types,
                          double& worst, std::string& err) {
    PolicyConfig cfg;
    cfg.variant = variant;
    cfg.hidden = 56;
    cfg.layers = 1;
    cfg.moments = 2;
    cfg.filter_degree = 1;
    cfg.heads = 8;
    cfg.context_hidden = 56;
    cfg.critic_hidden = 56;
    cfg.mlp_hidden = 64;
    PolicyParams params = PolicyParams::init(cfg, 90210);

    const int n = 5;
    const Eigen::MatrixXd f = random_cloud(n, 4, 42);
    const TaskGraph g = build_task_graph(f);
    const Eigen::MatrixXd lap =
        variant == PolicyVariant::Mlp ? Eigen::MatrixXd::Zero(n, n) : g.laplacian;
    std::vector<uint8_t> mask(n + 1, 1);
    mask[2] = 0;
    Eigen::VectorXd ctx(9);
    Rng crng(7);
    for (int i = 0; i < 9; ++i) ctx(i) = crng.uniform();

    auto loss_value = [&]() {
      PolicyWork w;
      w.reset(params);
      const ForwardResult fr = policy_forward(w, f, lap, mask, ctx);
      ad::Var logp = w.tape.log1(w.tape.pick(fr.probs, 0));
      ad::Var loss = w.tape.add(logp, fr.value);
      return w.tape.value(loss)(0, 0);
    };

    PolicyWork w;
    w.reset(params);
    const ForwardResult fr = policy_forward(w, f, lap, mask, ctx);
    ad::Var logp = w.tape.log1(w.tape.pick(fr.probs, 0));
    ad::Var loss = w.tape.add(logp, fr.value);
    w.tape.backward(loss);
    std::vector<Eigen::MatrixXd> grads;
    for (ad::Var v : w.param_vars) grads.push_back(w.tape.grad(v));

    auto type_of = [](const std::string& name) {
      return name.substr(0, name.find_first_of("._"));
    };
    std::map<std::string, int> counted;
    Rng pick(5150);
    size_t ix = 0;
    bool ok = true;
    params.for_each([&](const std::string& name, Eigen::MatrixXd& m) {
      const Eigen::MatrixXd& gr = grads[ix++];
      if (m.size() == 0 || !ok) return;
      const std::string type = type_of(name);
      if (std::find(types.begin(), types.end(), type) == types.end()) return;
      int want = 0;
      for (int s = 0; s < static_cast<int>(m.size()) && counted[type] + want < 80; ++s)
        ++want;
      for (int s = 0; s < want; ++s) {
        const int flat = static_cast<int>(pick.integer(m.size()));
        const int r = flat % static_cast<int>(m.rows());
        const int c = flat / static_cast<int>(m.rows());
        const double saved = m(r, c);
        const double h = 1e-5;
        m(r, c) = saved + h;
        const double up = loss_value();
        m(r, c) = saved - h;
        const double down = loss_value();
        m(r, c) = saved;
        const double fd = (up - down) / (2.0 * h);
        const double ad_g = gr(r, c);
        const double rel =
            std::abs(ad_g - fd) / std::max({1e-8, std::abs(ad_g), std::abs(fd)});
        worst = std::max(worst, rel);
        if (rel >= 1e-4) {
          err = fmt("%s(%d,%d): ad %.6g fd %.6g rel %.2e", name.c_str(), r, c, ad_g,
                    fd, rel);
          ok = false;
          return;
        }
        ++counted[type];
      }
    });
    if (!ok) return false;
    for (const std::string& t : types)
      if (counted[t] < 50) {
        err = fmt("layer type %s: only %d parameters checked", t.c_str(), counted[t]);
        return false;
      }
    return true;
  };

  double worst = 0.0;
  std::string err;
  if (!check_variant(PolicyVariant::CapamTd,
                     {"feat", "caps", "proj", "ctx", "depot", "key", "val", "out",
                      "final", "critic"},
                     worst, err))
    return {false, err};
  if (!check_variant(PolicyVariant::Mlp, {"mlp"}, worst, err)) return {false, err};
  return {true, fmt(">=50 params per layer type incl. mlp encoder; worst rel err %.1e",
                    worst)};
}

// ---- 6. simulator / model-constraint consistency ----
Outcome trace_consistency() {
  GenerationConfig gen;
  gen.lambda_t = 0.2;  // N=10, M=2
  int total_viol = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    auto s = std::make_shared<const Scenario>(generate_scenario(gen, 42000 + seed));
    EventLog log;
    const WorldState w = run_baseline_episode(s, BaselineKind::FeasRnd, seed, &log);
    int tours, decisions;
    observed_bounds(log, *s, tours, decisions);
    const TraceReport rep = trace_validate(log, *s, tours, decisions);
    if (!rep.mappable) return {false, fmt("episode %llu unmappable: %s",
                                          (unsigned long long)seed,
                                          rep.mapping_error.c_str())};
    total_viol += static_cast<int>(rep.violations.size());
    if (!rep.violations.empty())
      return {false, fmt("episode %llu: %zu violations, first: %s %s",
                         (unsigned long long)seed, rep.violations.size(),
                         rep.violations[0].family.c_str(),
                         rep.violations[0].detail.c_str())};
    if (rep.n_success != w.count_success())
      return {false, fmt("episode %llu: validator %d vs simulator %d",
                         (unsigned long long)seed, rep.n_success, w.count_success())};
  }

  // Injected faults must each be caught.
  auto flagged = [](const TraceReport& rep, const std::string& fam) {
    for (const auto& v : rep.violations)
      if (v.family == fam) return true;
    return false;
  };
  {
    Scenario s;
    s.tasks = {{1, 2.5, 0.0, 2000.0, 2.0}};
    s.depot_x = s.depot_y = 0.0;
    s.arena_w_km = s.arena_h_km = 6.0;
    EventLog log = {{0, 0, 1, 0.0, 250.0, 2.0}, {0, 1, 0, 250.0, 500.0, 0.0}};
    if (!flagged(trace_validate(log, s, 1, 2), "range_bounds"))
      return {false, "injected range overdraft not caught"};
  }
  {
    Scenario s;
    s.tasks = {{1, 0.3, 0.0, 2000.0, 9.0}};
    s.depot_x = s.depot_y = 0.0;
    s.arena_w_km = s.arena_h_km = 6.0;
    EventLog log = {{0, 0, 1, 0.0, 30.0, 7.0}, {0, 1, 0, 30.0, 60.0, 0.0}};
    if (!flagged(trace_validate(log, s, 1, 2), "work_bounds"))
      return {false, "injected capacity overdraft not caught"};
  }
  {
    GenerationConfig g2;
    g2.lambda_t = 0.2;
    auto s = std::make_shared<const Scenario>(generate_scenario(g2, 77));
    EventLog log;
    run_baseline_episode(s, BaselineKind::FeasRnd, 77, &log);
    for (LegRecord& l : log)
      if (l.delivered_kg > 0.0) {
        l.arrive += 200.0;  // forged late arrival
        break;
      }
    int tours, decisions;
    observed_bounds(log, *s, tours, decisions);
    if (!flagged(trace_validate(log, *s, tours, decisions), "travel_time"))
      return {false, "injected deadline/time fault not caught"};
  }
  return {true, "100 episodes: 0 violations, success counts agree; 3 faults caught"};
}

// ---- 11. full communication degeneracy ----
Outcome full_comm_degeneracy() {
  GenerationConfig gen;
  gen.lambda_t = 0.2;
  long checks = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Scenario plain = generate_scenario(gen, 6000 + seed);
    plain.fleet.comm_range_m = 1e15;
    auto s = std::make_shared<const Scenario>(plain);
    WorldState w = WorldState::reset(s, seed);
    Rng rng(seed);
    while (auto who = w.advance_to_decision()) {
      const int m = s->fleet.robot_count;
      for (int r = 0; r < m; ++r) {
        for (int k = 0; k < m; ++k, ++checks)
          if (!(w.belief(r).robots[k] == w.belief(k).robots[k]))
            return {false, fmt("belief mismatch r=%d k=%d at t=%.3f", r, k, w.time())};
        for (int i = 0; i < s->task_count(); ++i, ++checks) {
          const double truth = 1.0 - w.tasks()[i].remaining_kg / s->tasks[i].demand_kg;
          if (w.belief(r).completion[i] != truth)
            return {false, fmt("completion mismatch r=%d task=%d", r, i)};
        }
      }
      w.apply_action(*who, feasrnd_action(w, *who, rng));
    }
  }
  return {true, fmt("20 episodes, %ld exact belief checks", checks)};
}

// ---- 8. desk-scale learning signal ----
Outcome desk_learning(std::string* checkpoint_out) {
  const std::string out_dir = "acceptance_artifacts/desk_training";
  const uint64_t seed = 2026;
  const GenerationConfig gen = desk_scenario_config();
  const PolicyConfig pcfg = desk_policy_config();
  const PpoConfig ppo = PpoConfig::desk_profile();

  std::string ckpt = out_dir + "/final.bin";
  if (!std::filesystem::exists(ckpt)) {
    const TrainingRun run = train(gen, pcfg, ppo, seed, out_dir);
    ckpt = run.checkpoints.back();
  }
  *checkpoint_out = ckpt;

  const PolicyParams trained = load_checkpoint(ckpt);
  const PolicyParams untrained = PolicyParams::init(pcfg, seed);

  // Shared held-out scenario stream for all methods.
  const uint64_t eval_seed = derive_seed(seed, 0x4e1d);
  const int episodes = 100;
  std::vector<double> trained_c, untrained_c, feasrnd_c;
  for (int i = 0; i < episodes; ++i) {
    const uint64_t s = derive_seed(eval_seed, 0xe7a1, i);
    auto scn = std::make_shared<const Scenario>(generate_scenario(gen, s));
    {
      WorldState w = WorldState::reset(scn, s);
      PolicyRunner runner(trained);
      runner.start_episode();
      while (auto who = w.advance_to_decision())
        w.apply_action(*who, runner.decide(w.observe(*who)));
      trained_c.push_back(100.0 * w.count_success() / scn->task_count());
    }
    {
      WorldState w = WorldState::reset(scn, s);
      PolicyRunner runner(untrained);
      runner.start_episode();
      while (auto who = w.advance_to_decision())
        w.apply_action(*who, runner.decide(w.observe(*who)));
      untrained_c.push_back(100.0 * w.count_success() / scn->task_count());
    }
    feasrnd_c.push_back(100.0 *
                        run_baseline_episode(scn, BaselineKind::FeasRnd, s).count_success() /
                        scn->task_count());
  }
  const double mt = mean(trained_c), mu = mean(untrained_c), mf = mean(feasrnd_c);
  const WelchResult vs_untrained = welch_t_test(trained_c, untrained_c);
  const std::string detail =
      fmt("trained %.1f%%, feasrnd %.1f%% (margin %+.1fpp, need >= +10), untrained "
          "%.1f%% (p=%.2e)",
          mt, mf, mt - mf, mu, vs_untrained.p);
  const bool pass = (mt - mf >= 10.0) && (mt > mu) && (vs_untrained.p < 0.05);
  return {pass, detail};
}

// ---- 7. oracle dominance ----
Outcome oracle_dominance(const std::string& checkpoint) {
  const PolicyParams trained = load_checkpoint(checkpoint);
  const PolicyParams untrained = PolicyParams::init(desk_policy_config(), 555);
  int bigmrta_matches = 0;
  for (int inst = 0; inst < 50; ++inst) {
    GenerationConfig gen;
    gen.lambda_t = 0.1;                      // N = 5
    gen.lambda_r = inst % 2 ? 2.0 : 1.0;     // M = 2 or 1
    Scenario s = generate_scenario(gen, 80000 + inst);
    s.fleet.comm_range_m = 1e15;  // full communication
    auto shared = std::make_shared<const Scenario>(s);

    const ExactSolution best = brute_force_optimal(s);
    if (!best.exhaustive)
      return {false, fmt("instance %d: search capped at %lld nodes", inst,
                         best.nodes_expanded)};

    auto run_policy = [&shared](const PolicyParams& p) {
      WorldState w = WorldState::reset(shared, shared->seed);
      PolicyRunner runner(p);
      runner.start_episode();
      while (auto who = w.advance_to_decision())
        w.apply_action(*who, runner.decide(w.observe(*who)));
      return w.count_success();
    };

    const int rnd = run_baseline_episode(shared, BaselineKind::FeasRnd, 80000 + inst)
                        .count_success();
    const int big = run_baseline_episode(shared, BaselineKind::BigMrta, 80000 + inst)
                        .count_success();
    const int pol_t = run_policy(trained);
    const int pol_u = run_policy(untrained);
    if (best.n_success < rnd || best.n_success < big || best.n_success < pol_t ||
        best.n_success < pol_u)
      return {false, fmt("instance %d: oracle %d beaten (rnd %d big %d capam %d/%d)",
                         inst, best.n_success, rnd, big, pol_t, pol_u)};
    if (big == best.n_success) ++bigmrta_matches;
  }
  if (bigmrta_matches == 0)
    return {false, "bigmrta never achieved the oracle optimum"};
  return {true, fmt("50 instances dominated; bigmrta matched the optimum on %d",
                    bigmrta_matches)};
}

// ---- 9. topology ablation hook ----
Outcome ablation_hook(const std::string& checkpoint) {
  const PolicyParams trained = load_checkpoint(checkpoint);
  const GenerationConfig gen = desk_scenario_config();
  std::vector<double> with_td, without_td;
  for (int i = 0; i < 30; ++i) {
    const uint64_t s = derive_seed(0xab1a, i);
    auto scn = std::make_shared<const Scenario>(generate_scenario(gen, s));
    for (int variant = 0; variant < 2; ++variant) {
      WorldState w = WorldState::reset(scn, s);
      PolicyRunner runner(trained);
      runner.set_variant(variant == 0 ? PolicyVariant::CapamTd : PolicyVariant::Capam);
      runner.start_episode();
      while (auto who = w.advance_to_decision())
        w.apply_action(*who, runner.decide(w.observe(*who)));
      (variant == 0 ? with_td : without_td)
          .push_back(100.0 * w.count_success() / scn->task_count());
    }
  }
  const double gap = mean(with_td) - mean(without_td);
  const double p = welch_t_test(with_td, without_td).p;
  // Reported, not thresholded: the hook must run both variants on identical
  // seeds and emit the paired gap.
  return {true, fmt("paired gap (capam-td minus capam) %+.2fpp over 30 episodes, p=%.3f",
                    gap, p)};
}

// ---- 10. scalability mechanics ----
Outcome scalability(const std::string& checkpoint) {
  const PolicyParams trained = load_checkpoint(checkpoint);
  const std::vector<double> lambda_ts = {0.2, 0.5, 1.0, 2.0};  // N = 10, 25, 50, 100
  std::vector<double> med_latency, ns;
  std::string sizes;
  for (double lt : lambda_ts) {
    GenerationConfig gen;
    gen.lambda_t = lt;
    gen.lambda_r = 1.0;
    std::vector<double> lats;
    for (uint64_t rep = 0; rep < 2; ++rep) {
      const uint64_t s = derive_seed(0x5ca1e, static_cast<uint64_t>(lt * 100), rep);
      auto scn = std::make_shared<const Scenario>(generate_scenario(gen, s));
      WorldState w = WorldState::reset(scn, s);
      PolicyRunner runner(trained);
      runner.start_episode();
      SteadyClock clock;
      while (auto who = w.advance_to_decision()) {
        const double t0 = clock.now();
        const int action = runner.decide(w.observe(*who));
        lats.push_back(clock.now() - t0);
        w.apply_action(*who, action);
      }
    }
    const double med = quantiles(lats).median;
    med_latency.push_back(med);
    ns.push_back(gen.task_count());
    sizes += fmt("N=%d:%.2fms ", gen.task_count(), med * 1e3);
  }
  // Least-squares slope of log latency vs log N.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int k = static_cast<int>(ns.size());
  for (int i = 0; i < k; ++i) {
    const double x = std::log(ns[i]), y = std::log(med_latency[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  const bool pass = slope < 2.0;
  return {pass, fmt("%sscaling exponent %.2f (< 2 required)", sizes.c_str(), slope)};
}

}  // namespace

int main() {
  std::filesystem::create_directories("acceptance_artifacts");
  int failed = 0;
  auto report = [&failed](int id, const char* title, const Outcome& o) {
    std::printf("[%s] %2d. %-38s %s\n", o.pass ? "PASS" : "FAIL", id, title,
                o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  };

  report(1, "topology oracle suite", topology_oracle_suite());
  report(2, "H0-MST equivalence", h0_mst_equivalence());
  report(3, "wasserstein metric axioms", wasserstein_axioms());
  report(4, "equivariance and masking", equivariance_and_masking());
  report(5, "gradient finite-difference check", gradient_check());
  report(6, "trace validator consistency", trace_consistency());
  report(11, "full-communication degeneracy", full_comm_degeneracy());

  std::string checkpoint;
  report(8, "desk-scale learning signal", desk_learning(&checkpoint));
  if (checkpoint.empty()) {
    std::printf("[FAIL]  7/9/10 skipped: no trained checkpoint\n");
    return failed + 3;
  }
  report(7, "exact-oracle dominance", oracle_dominance(checkpoint));
  report(9, "topology ablation hook", ablation_hook(checkpoint));
  report(10, "scalability mechanics", scalability(checkpoint));

  std::printf("%s (%d criteria failed)\n", failed == 0 ? "ALL CRITERIA PASSED" : "FAILURES",
              failed);
  return failed;
}
