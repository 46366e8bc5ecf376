#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "autodiff.hpp"
#include "rng.hpp"
#include "simenv.hpp"
#include "taskgraph.hpp"
#include "topology.hpp"

namespace ctp {

// Which encoder/Laplacian combination drives the policy. CapamTd feeds the
// capsule encoder the normalized topological-descriptor matrix, Capam the
// plain graph Laplacian, Mlp bypasses graph mixing entirely.
enum class PolicyVariant { CapamTd, Capam, Mlp };

std::string to_string(PolicyVariant v);
PolicyVariant policy_variant_from_string(const std::string& s);

struct PolicyConfig {
  PolicyVariant variant = PolicyVariant::CapamTd;
  int feature_dim = 4;
  int hidden = 128;         // node embedding width h_l
  int layers = 3;           // capsule layers L_e
  int moments = 3;          // highest statistical moment P
  int filter_degree = 3;    // Laplacian power K
  int heads = 8;
  int context_features = 9;
  int context_hidden = 128; // h_q
  int critic_hidden = 128;
  int mlp_hidden = 512;     // per-node MLP encoder width
  TdConfig td;

  void validate() const;
};

// All learnable tensors. Enumeration order is fixed; checkpoints, Adam state
// and gradient bookkeeping all rely on it.
struct PolicyParams {
  PolicyConfig cfg;

  Eigen::MatrixXd feat_w, feat_b;
  std::vector<std::vector<std::vector<Eigen::MatrixXd>>> caps_w;  // [layer][moment][k]
  std::vector<Eigen::MatrixXd> proj_w, proj_b;                    // per layer
  Eigen::MatrixXd mlp_w1, mlp_b1, mlp_w2, mlp_b2, mlp_w3, mlp_b3;
  Eigen::MatrixXd ctx_w1, ctx_b1, ctx_w2, ctx_b2;
  Eigen::MatrixXd depot_embed;
  Eigen::MatrixXd key_w, val_w, out_w, out_b, final_w;
  Eigen::MatrixXd critic_w1, critic_b1, critic_w2, critic_b2;

  static PolicyParams init(const PolicyConfig& cfg, uint64_t seed);

  void for_each(const std::function<void(const std::string&, Eigen::MatrixXd&)>& fn);
  void for_each(const std::function<void(const std::string&, const Eigen::MatrixXd&)>& fn) const;
  size_t tensor_count() const;
  size_t parameter_count() const;
};

// A tape with this parameter set registered once; forward passes for many
// steps may share it so the backward sweep accumulates parameter gradients.
struct PolicyWork {
  ad::Tape tape;
  std::vector<ad::Var> param_vars;  // in for_each order
  const PolicyParams* params = nullptr;

  void reset(const PolicyParams& p);
};

struct ForwardResult {
  ad::Var probs;  // 1 x (N+1), masked entries exactly zero
  ad::Var value;  // 1 x 1
};

// Graph-capsule (or per-node MLP) encoder; returns N x h node embeddings.
ad::Var encode(PolicyWork& w, const Eigen::MatrixXd& features,
               const Eigen::MatrixXd& laplacian);

// Context query from the 9 normalized context features; peer information is
// already mean-aggregated in the observation, so the result is invariant to
// peer ordering by construction.
ad::Var build_context(PolicyWork& w, const Eigen::VectorXd& context);

// Multi-head attention decoder over [depot embedding; node embeddings].
ad::Var decode(PolicyWork& w, ad::Var embeddings, ad::Var query,
               const std::vector<uint8_t>& mask);

ForwardResult policy_forward(PolicyWork& w, const Eigen::MatrixXd& features,
                             const Eigen::MatrixXd& laplacian,
                             const std::vector<uint8_t>& mask,
                             const Eigen::VectorXd& context);

// The encoder input matrix for a variant: normalized TD affinity (CapamTd),
// the graph's own normalized Laplacian (Capam), or an unused zero matrix
// (Mlp). `cache` may be null for the one-shot path.
Eigen::MatrixXd policy_laplacian(const TaskGraph& g, PolicyVariant variant,
                                 const TdConfig& td, TdCache* cache, int threads = 1);

// Checkpoint: versioned binary blob of named tensors plus a JSON header.
void save_checkpoint(const PolicyParams& params, const std::string& path,
                     const std::map<std::string, Eigen::MatrixXd>& extra_tensors = {},
                     const std::string& extra_json = "{}");
PolicyParams load_checkpoint(const std::string& path,
                             std::map<std::string, Eigen::MatrixXd>* extra_tensors = nullptr,
                             std::string* extra_json = nullptr);

// Evaluation-time decision maker: builds the task graph from an observation,
// derives the variant's Laplacian (with per-robot TD caching), runs the
// network and picks an action (greedy argmax, or sampled when rng is given).
class PolicyRunner {
public:
  PolicyRunner(const PolicyParams& params, Rng* sample_rng = nullptr);

  // Overrides the Laplacian choice while keeping the weights (used by the
  // topology ablation); defaults to the checkpoint's own variant.
  void set_variant(PolicyVariant v) { variant_ = v; }

  void start_episode();
  int decide(const Observation& obs);

private:
  const PolicyParams& params_;
  PolicyVariant variant_;
  Rng* rng_;
  PolicyWork work_;
  std::map<int, TdCache> caches_;  // one per deciding robot
};

int sample_from_probs(const Eigen::MatrixXd& probs, Rng& rng);
int argmax_probs(const Eigen::MatrixXd& probs);

}  // namespace ctp
