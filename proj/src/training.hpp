#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "policy.hpp"
#include "scenario.hpp"
#include "simenv.hpp"

namespace ctp {

struct PpoConfig {
  long long total_steps = 4'000'000;
  int rollout_size = 40'000;
  int batch_size = 4'000;
  double learning_rate = 1e-6;
  double entropy_coef = 0.01;
  double clip_ratio = 0.2;
  double gamma = 1.0;       // terminal-only reward; discounting would skew credit
  double gae_lambda = 0.95;
  int epochs_per_update = 10;
  int envs = 2;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;
  int threads = 2;
  int checkpoint_every_updates = 4;
  int eval_episodes = 10;

  void validate() const;

  // Small-network, short-run profile for a single workstation.
  static PpoConfig desk_profile();
};

PolicyConfig desk_policy_config(PolicyVariant variant = PolicyVariant::CapamTd);
GenerationConfig desk_scenario_config();

struct StepRecord {
  Eigen::MatrixXd features;   // N x 4
  Eigen::MatrixXd laplacian;  // encoder input, N x N
  std::vector<uint8_t> mask;
  Eigen::VectorXd context;
  int action = 0;
  double logp = 0.0;
  double value = 0.0;
  double reward = 0.0;     // terminal reward on episode-ending steps, else 0
  bool episode_end = false;
  double bootstrap = 0.0;  // critic value after a truncated episode tail
  bool truncated = false;
  double ret = 0.0;
  double advantage = 0.0;
};

struct RolloutStats {
  int episodes = 0;
  double mean_reward = 0.0;
  double mean_completion = 0.0;  // percent
};

struct RolloutBuffer {
  std::vector<StepRecord> steps;
  RolloutStats stats;
  bool advantages_ready = false;
  bool degenerate_advantages = false;
};

struct AdamState {
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;
  long long step = 0;

  static AdamState init(const PolicyParams& params);
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double grad_norm = 0.0;
};

// Environment sampler: one episode's scenario per (env, episode) pair, all
// derived deterministically from the run seed.
struct EnvStream {
  GenerationConfig scenario_cfg;
  uint64_t run_seed = 0;
};

RolloutBuffer collect_rollouts(const EnvStream& stream, const PolicyParams& params,
                               const PpoConfig& cfg, long long steps_done);

void compute_advantages(RolloutBuffer& buffer, const PpoConfig& cfg);

UpdateStats ppo_update(PolicyParams& params, AdamState& adam, const RolloutBuffer& buffer,
                       const PpoConfig& cfg, uint64_t update_seed);

struct TrainingRun {
  std::string out_dir;
  std::vector<std::string> checkpoints;
  long long steps_done = 0;
  double final_eval_completion = 0.0;
};

// Full loop: collect / advantage / update, periodic checkpoints and held-out
// evaluation, learning-curve CSV {step, mean_reward, mean_completion}.
// `resume_from` restarts bit-exactly from a checkpoint written by this
// function (same config and thread count required).
TrainingRun train(const GenerationConfig& scenario_cfg, const PolicyConfig& policy_cfg,
                  const PpoConfig& cfg, uint64_t seed, const std::string& out_dir,
                  const std::string& resume_from = "");

// Mean completion percent of a greedy policy over `episodes` held-out
// scenarios (seed stream disjoint from training).
double evaluate_policy(const PolicyParams& params, const GenerationConfig& scenario_cfg,
                       uint64_t eval_seed, int episodes,
                       std::optional<PolicyVariant> variant_override = std::nullopt);

}  // namespace ctp
