#include "training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "threading.hpp"

namespace ctp {

void PpoConfig::validate() const {
  if (rollout_size <= 0 || batch_size <= 0 || rollout_size % batch_size != 0)
    throw std::invalid_argument("rollout buffer size must be a multiple of batch size");
  if (envs < 1 || threads < 1 || epochs_per_update < 1)
    throw std::invalid_argument("bad ppo config");
}

PpoConfig PpoConfig::desk_profile() {
  PpoConfig c;
  c.total_steps = 200'000;
  c.rollout_size = 8'192;
  c.batch_size = 512;
  c.learning_rate = 3e-4;
  c.epochs_per_update = 3;
  c.envs = 2;
  c.threads = 2;
  c.checkpoint_every_updates = 8;
  return c;
}

PolicyConfig desk_policy_config(PolicyVariant variant) {
  PolicyConfig c;
  c.variant = variant;
  c.hidden = 64;
  c.layers = 2;
  c.moments = 2;
  c.filter_degree = 2;
  c.heads = 8;
  c.context_hidden = 64;
  c.critic_hidden = 64;
  c.mlp_hidden = 128;
  return c;
}

GenerationConfig desk_scenario_config() {
  GenerationConfig g;
  g.lambda_t = 0.2;  // N = 10
  g.lambda_r = 1.0;  // M = int(6*0.2*1.0)+1 = 2
  return g;
}

AdamState AdamState::init(const PolicyParams& params) {
  AdamState s;
  params.for_each([&s](const std::string&, const Eigen::MatrixXd& m) {
    s.m.push_back(Eigen::MatrixXd::Zero(m.rows(), m.cols()));
    s.v.push_back(Eigen::MatrixXd::Zero(m.rows(), m.cols()));
  });
  return s;
}

namespace {

struct EpisodeResult {
  std::vector<StepRecord> steps;
  double reward = 0.0;
  double completion_pct = 0.0;
  bool truncated = false;
};

// Runs one episode, recording at most `budget` decision steps; if the budget
// runs out mid-episode the tail is truncated and bootstrapped with the critic.
EpisodeResult run_episode(const PolicyParams& params, const GenerationConfig& scenario_cfg,
                          uint64_t scenario_seed, Rng& action_rng, int budget) {
  EpisodeResult out;
  auto scenario = std::make_shared<const Scenario>(generate_scenario(scenario_cfg, scenario_seed));
  WorldState world = WorldState::reset(scenario, scenario_seed);

  PolicyWork work;
  work.reset(params);
  std::map<int, TdCache> caches;
  int steps_on_tape = 0;

  while (true) {
    const std::optional<int> who = world.advance_to_decision();
    if (!who) break;

    Observation obs = world.observe(*who);
    const TaskGraph g = build_task_graph(obs.task_features);
    TdCache* cache = nullptr;
    if (params.cfg.variant == PolicyVariant::CapamTd)
      cache = &caches.try_emplace(*who, params.cfg.td).first->second;
    Eigen::MatrixXd lap = policy_laplacian(g, params.cfg.variant, params.cfg.td, cache);

    // Keep the episode tape from growing without bound.
    if (++steps_on_tape > 64) {
      work.reset(params);
      steps_on_tape = 1;
    }
    const ForwardResult fr =
        policy_forward(work, obs.task_features, lap, obs.feasible, obs.context);
    const Eigen::MatrixXd& probs = work.tape.value(fr.probs);
    const double value = work.tape.value(fr.value)(0, 0);

    if (static_cast<int>(out.steps.size()) >= budget) {
      // Budget exhausted: bootstrap the unfinished episode with the critic.
      out.truncated = true;
      if (!out.steps.empty()) {
        out.steps.back().truncated = true;
        out.steps.back().bootstrap = value;
      }
      return out;
    }

    const int action = sample_from_probs(probs, action_rng);

    StepRecord rec;
    rec.features = obs.task_features;
    rec.laplacian = std::move(lap);
    rec.mask = obs.feasible;
    rec.context = obs.context;
    rec.action = action;
    rec.logp = std::log(probs(0, action));
    rec.value = value;
    out.steps.push_back(std::move(rec));

    world.apply_action(*who, action);
  }

  out.reward = world.compute_reward();
  out.completion_pct = 100.0 * world.count_success() / scenario->task_count();
  if (!out.steps.empty()) {
    out.steps.back().reward = out.reward;
    out.steps.back().episode_end = true;
  }
  return out;
}

}  // namespace

RolloutBuffer collect_rollouts(const EnvStream& stream, const PolicyParams& params,
                               const PpoConfig& cfg, long long steps_done) {
  cfg.validate();
  const long long round = steps_done / cfg.rollout_size;

  std::vector<std::vector<StepRecord>> per_env(cfg.envs);
  std::vector<RolloutStats> env_stats(cfg.envs);

  const int base_quota = cfg.rollout_size / cfg.envs;
  const int remainder = cfg.rollout_size % cfg.envs;

  parallel_for(cfg.envs, cfg.threads, [&](int begin, int end, int) {
    for (int e = begin; e < end; ++e) {
      const int quota = base_quota + (e < remainder ? 1 : 0);
      Rng action_rng(derive_seed(stream.run_seed, 0xac7 + round, e));
      std::vector<StepRecord>& sink = per_env[e];
      double reward_sum = 0.0, completion_sum = 0.0;
      int episodes = 0;
      uint64_t episode_idx = 0;
      while (static_cast<int>(sink.size()) < quota) {
        const uint64_t scn_seed =
            derive_seed(stream.run_seed, (round + 1) * 1000003ull + e, episode_idx++);
        EpisodeResult ep = run_episode(params, stream.scenario_cfg, scn_seed, action_rng,
                                       quota - static_cast<int>(sink.size()));
        if (!ep.truncated) {
          reward_sum += ep.reward;
          completion_sum += ep.completion_pct;
          ++episodes;
        }
        for (auto& s : ep.steps) sink.push_back(std::move(s));
      }
      env_stats[e] = {episodes, episodes ? reward_sum / episodes : 0.0,
                      episodes ? completion_sum / episodes : 0.0};
    }
  });

  RolloutBuffer buf;
  buf.steps.reserve(cfg.rollout_size);
  int total_eps = 0;
  double r = 0.0, c = 0.0;
  for (int e = 0; e < cfg.envs; ++e) {
    for (auto& s : per_env[e]) buf.steps.push_back(std::move(s));
    total_eps += env_stats[e].episodes;
    r += env_stats[e].mean_reward * env_stats[e].episodes;
    c += env_stats[e].mean_completion * env_stats[e].episodes;
  }
  buf.stats.episodes = total_eps;
  buf.stats.mean_reward = total_eps ? r / total_eps : 0.0;
  buf.stats.mean_completion = total_eps ? c / total_eps : 0.0;
  if (static_cast<int>(buf.steps.size()) != cfg.rollout_size)
    throw std::logic_error("rollout buffer under/overfilled");
  return buf;
}

void compute_advantages(RolloutBuffer& buffer, const PpoConfig& cfg) {
  auto& steps = buffer.steps;
  const int n = static_cast<int>(steps.size());

  // GAE within each episode segment, swept backwards.
  double adv = 0.0, next_value = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    StepRecord& s = steps[t];
    if (s.episode_end || s.truncated || t == n - 1) {
      next_value = s.truncated ? s.bootstrap : 0.0;
      adv = 0.0;
    }
    const double delta = s.reward + cfg.gamma * next_value - s.value;
    adv = delta + cfg.gamma * cfg.gae_lambda * adv;
    s.advantage = adv;
    s.ret = adv + s.value;
    next_value = s.value;
  }

  double mean = 0.0;
  for (const auto& s : steps) mean += s.advantage;
  mean /= n;
  double var = 0.0;
  for (const auto& s : steps) var += (s.advantage - mean) * (s.advantage - mean);
  var /= n;
  const double sd = std::sqrt(var);
  if (sd < 1e-12) {
    buffer.degenerate_advantages = true;  // nothing to normalize, leave as-is
  } else {
    for (auto& s : steps) s.advantage = (s.advantage - mean) / sd;
  }
  buffer.advantages_ready = true;
}

namespace {

struct GradBuffer {
  std::vector<Eigen::MatrixXd> g;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;

  static GradBuffer zeros_like(const PolicyParams& params) {
    GradBuffer b;
    params.for_each([&b](const std::string&, const Eigen::MatrixXd& m) {
      b.g.push_back(Eigen::MatrixXd::Zero(m.rows(), m.cols()));
    });
    return b;
  }

  void accumulate(const GradBuffer& other) {
    for (size_t i = 0; i < g.size(); ++i) g[i] += other.g[i];
    policy_loss += other.policy_loss;
    value_loss += other.value_loss;
    entropy += other.entropy;
  }
};

// Loss and gradients for one contiguous slice of minibatch indices. All steps
// share one tape so parameter gradients accumulate in a single backward pass.
GradBuffer chunk_gradients(const PolicyParams& params, const RolloutBuffer& buffer,
                           const std::vector<int>& order, int begin, int end,
                           const PpoConfig& cfg) {
  PolicyWork work;
  work.reset(params);
  ad::Tape& t = work.tape;

  ad::Var total;
  bool first = true;
  double policy_loss = 0.0, value_loss = 0.0, entropy_sum = 0.0;
  for (int q = begin; q < end; ++q) {
    const StepRecord& s = buffer.steps[order[q]];
    const ForwardResult fr =
        policy_forward(work, s.features, s.laplacian, s.mask, s.context);

    ad::Var logp = t.log1(t.pick(fr.probs, s.action));
    ad::Var ratio = t.exp1(t.add_scalar(logp, -s.logp));
    ad::Var surr1 = t.scale(ratio, s.advantage);
    ad::Var surr2 = t.scale(t.clamp(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio),
                            s.advantage);
    ad::Var objective = t.min2(surr1, surr2);

    ad::Var verr = t.add_scalar(fr.value, -s.ret);
    ad::Var vloss = t.cmul(verr, verr);
    ad::Var ent = t.entropy_masked(fr.probs, s.mask);

    ad::Var step_loss = t.add(t.scale(objective, -1.0),
                              t.add(t.scale(vloss, cfg.value_coef),
                                    t.scale(ent, -cfg.entropy_coef)));
    total = first ? step_loss : t.add(total, step_loss);
    first = false;

    policy_loss -= t.value(objective)(0, 0);
    value_loss += t.value(vloss)(0, 0);
    entropy_sum += t.value(ent)(0, 0);
  }

  t.backward(total);

  GradBuffer out;
  out.g.reserve(work.param_vars.size());
  for (ad::Var v : work.param_vars) out.g.push_back(t.grad(v));
  out.policy_loss = policy_loss;
  out.value_loss = value_loss;
  out.entropy = entropy_sum;
  return out;
}

void adam_step(PolicyParams& params, AdamState& adam, const GradBuffer& grads,
               double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++adam.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam.step));
  size_t i = 0;
  params.for_each([&](const std::string&, Eigen::MatrixXd& w) {
    if (w.size() > 0) {
      adam.m[i] = beta1 * adam.m[i] + (1.0 - beta1) * grads.g[i];
      adam.v[i] = beta2 * adam.v[i] + (1.0 - beta2) * grads.g[i].cwiseProduct(grads.g[i]);
      const Eigen::ArrayXXd mhat = adam.m[i].array() / bc1;
      const Eigen::ArrayXXd vhat = adam.v[i].array() / bc2;
      w.array() -= lr * mhat / (vhat.sqrt() + eps);
    }
    ++i;
  });
}

}  // namespace

UpdateStats ppo_update(PolicyParams& params, AdamState& adam, const RolloutBuffer& buffer,
                       const PpoConfig& cfg, uint64_t update_seed) {
  if (!buffer.advantages_ready)
    throw std::logic_error("ppo_update requires compute_advantages first");
  const int n = static_cast<int>(buffer.steps.size());

  UpdateStats stats;
  int stat_batches = 0;
  Rng shuffle_rng(derive_seed(update_seed, 0x5fu));

  for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.integer(static_cast<uint64_t>(i) + 1)]);

    for (int start = 0; start < n; start += cfg.batch_size) {
      const int stop = std::min(n, start + cfg.batch_size);
      const int bsz = stop - start;

      const int workers = std::min(cfg.threads, bsz);
      std::vector<GradBuffer> partial(workers);
      parallel_for(workers, workers, [&](int wb, int we, int) {
        for (int w = wb; w < we; ++w) {
          const int chunk = (bsz + workers - 1) / workers;
          const int cb = start + w * chunk;
          const int ce = std::min(stop, cb + chunk);
          if (cb < ce) partial[w] = chunk_gradients(params, buffer, order, cb, ce, cfg);
        }
      });

      GradBuffer grads = GradBuffer::zeros_like(params);
      for (int w = 0; w < workers; ++w)
        if (!partial[w].g.empty()) grads.accumulate(partial[w]);

      const double inv = 1.0 / bsz;
      double sq_norm = 0.0;
      for (auto& g : grads.g) {
        g *= inv;
        sq_norm += g.squaredNorm();
      }
      double norm = std::sqrt(sq_norm);
      if (!std::isfinite(norm)) {
        std::string bad = "<unknown>";
        size_t gi = 0;
        params.for_each([&](const std::string& name, Eigen::MatrixXd&) {
          if (bad == "<unknown>" && grads.g[gi].size() > 0 && !grads.g[gi].allFinite())
            bad = name;
          ++gi;
        });
        save_checkpoint(params, "ppo_nan_batch.ckpt");
        throw std::runtime_error("non-finite gradient in parameter '" + bad +
                                 "'; offending batch checkpointed");
      }
      if (cfg.max_grad_norm > 0 && norm > cfg.max_grad_norm) {
        const double scale = cfg.max_grad_norm / norm;
        for (auto& g : grads.g) g *= scale;
      }
      adam_step(params, adam, grads, cfg.learning_rate);

      stats.policy_loss += grads.policy_loss * inv;
      stats.value_loss += grads.value_loss * inv;
      stats.entropy += grads.entropy * inv;
      stats.grad_norm += norm;
      ++stat_batches;
    }
  }
  if (stat_batches > 0) {
    stats.policy_loss /= stat_batches;
    stats.value_loss /= stat_batches;
    stats.entropy /= stat_batches;
    stats.grad_norm /= stat_batches;
  }
  return stats;
}

double evaluate_policy(const PolicyParams& params, const GenerationConfig& scenario_cfg,
                       uint64_t eval_seed, int episodes,
                       std::optional<PolicyVariant> variant_override) {
  double completion = 0.0;
  for (int i = 0; i < episodes; ++i) {
    const uint64_t s = derive_seed(eval_seed, 0xe7a1, i);
    auto scenario = std::make_shared<const Scenario>(generate_scenario(scenario_cfg, s));
    WorldState world = WorldState::reset(scenario, s);
    PolicyRunner runner(params);
    if (variant_override) runner.set_variant(*variant_override);
    runner.start_episode();
    while (auto who = world.advance_to_decision())
      world.apply_action(*who, runner.decide(world.observe(*who)));
    completion += 100.0 * world.count_success() / scenario->task_count();
  }
  return episodes ? completion / episodes : 0.0;
}

TrainingRun train(const GenerationConfig& scenario_cfg, const PolicyConfig& policy_cfg,
                  const PpoConfig& cfg, uint64_t seed, const std::string& out_dir,
                  const std::string& resume_from) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);

  PolicyParams params = PolicyParams::init(policy_cfg, seed);
  AdamState adam = AdamState::init(params);
  long long steps_done = 0;

  if (!resume_from.empty()) {
    std::map<std::string, Eigen::MatrixXd> extra;
    std::string extra_json;
    params = load_checkpoint(resume_from, &extra, &extra_json);
    adam = AdamState::init(params);
    size_t i = 0;
    params.for_each([&](const std::string& name, Eigen::MatrixXd&) {
      if (auto it = extra.find("adam.m." + name); it != extra.end()) adam.m[i] = it->second;
      if (auto it = extra.find("adam.v." + name); it != extra.end()) adam.v[i] = it->second;
      ++i;
    });
    const auto meta = nlohmann::json::parse(extra_json);
    adam.step = meta.at("adam_step");
    steps_done = meta.at("steps_done");
  }

  const EnvStream stream{scenario_cfg, seed};

  const std::string curve_path = out_dir + "/learning_curve.csv";
  const std::string eval_path = out_dir + "/eval_curve.csv";
  const bool fresh = resume_from.empty();
  {
    std::ofstream curve(curve_path, fresh ? std::ios::trunc : std::ios::app);
    if (fresh) curve << "step,mean_reward,mean_completion\n";
    std::ofstream eval(eval_path, fresh ? std::ios::trunc : std::ios::app);
    if (fresh) eval << "step,heldout_mean_completion\n";
  }

  TrainingRun run;
  run.out_dir = out_dir;

  auto write_ckpt = [&](const std::string& name) {
    std::map<std::string, Eigen::MatrixXd> extra;
    size_t i = 0;
    params.for_each([&](const std::string& pname, Eigen::MatrixXd&) {
      extra["adam.m." + pname] = adam.m[i];
      extra["adam.v." + pname] = adam.v[i];
      ++i;
    });
    nlohmann::json meta;
    meta["adam_step"] = adam.step;
    meta["steps_done"] = steps_done;
    meta["seed"] = seed;
    const std::string path = out_dir + "/" + name;
    save_checkpoint(params, path, extra, meta.dump());
    run.checkpoints.push_back(path);
    return path;
  };

  int update_idx = static_cast<int>(steps_done / cfg.rollout_size);
  while (steps_done < cfg.total_steps) {
    RolloutBuffer buffer = collect_rollouts(stream, params, cfg, steps_done);
    compute_advantages(buffer, cfg);
    const uint64_t update_seed = derive_seed(seed, 0x0bda7e, update_idx);
    ppo_update(params, adam, buffer, cfg, update_seed);
    steps_done += cfg.rollout_size;
    ++update_idx;

    {
      std::ofstream curve(curve_path, std::ios::app);
      curve << steps_done << "," << buffer.stats.mean_reward << ","
            << buffer.stats.mean_completion << "\n";
    }
    if (update_idx % cfg.checkpoint_every_updates == 0 || steps_done >= cfg.total_steps) {
      write_ckpt("ckpt_" + std::to_string(steps_done) + ".bin");
      const double heldout =
          evaluate_policy(params, scenario_cfg, derive_seed(seed, 0x4e1d), cfg.eval_episodes);
      std::ofstream eval(eval_path, std::ios::app);
      eval << steps_done << "," << heldout << "\n";
      run.final_eval_completion = heldout;
    }
  }

  write_ckpt("final.bin");
  run.steps_done = steps_done;
  return run;
}

}  // namespace ctp
