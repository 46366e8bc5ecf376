#include "policy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ctp {

std::string to_string(PolicyVariant v) {
  switch (v) {
    case PolicyVariant::CapamTd: return "capam-td";
    case PolicyVariant::Capam: return "capam";
    case PolicyVariant::Mlp: return "mlp";
  }
  return "?";
}

PolicyVariant policy_variant_from_string(const std::string& s) {
  if (s == "capam-td") return PolicyVariant::CapamTd;
  if (s == "capam") return PolicyVariant::Capam;
  if (s == "mlp") return PolicyVariant::Mlp;
  throw std::invalid_argument("unknown policy variant: " + s);
}

void PolicyConfig::validate() const {
  if (hidden <= 0 || layers < 0 || moments < 1 || filter_degree < 0)
    throw std::invalid_argument("bad encoder shape");
  if (hidden % heads != 0)
    throw std::invalid_argument("hidden width must be divisible by head count");
  if (feature_dim != 4 || context_features != 9)
    throw std::invalid_argument("unsupported feature layout");
}

namespace {

Eigen::MatrixXd init_matrix(int rows, int cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

PolicyParams PolicyParams::init(const PolicyConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, 0x70a1));
  PolicyParams p;
  p.cfg = cfg;
  const int h = cfg.hidden;

  p.feat_w = init_matrix(cfg.feature_dim, h, rng);
  p.feat_b = Eigen::MatrixXd::Zero(1, h);

  p.caps_w.resize(cfg.layers);
  p.proj_w.resize(cfg.layers);
  p.proj_b.resize(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    p.caps_w[l].resize(cfg.moments);
    for (int m = 0; m < cfg.moments; ++m) {
      p.caps_w[l][m].resize(cfg.filter_degree + 1);
      for (int k = 0; k <= cfg.filter_degree; ++k)
        p.caps_w[l][m][k] = init_matrix(h, h, rng);
    }
    p.proj_w[l] = init_matrix(cfg.moments * h, h, rng);
    p.proj_b[l] = Eigen::MatrixXd::Zero(1, h);
  }

  p.mlp_w1 = init_matrix(cfg.feature_dim, cfg.mlp_hidden, rng);
  p.mlp_b1 = Eigen::MatrixXd::Zero(1, cfg.mlp_hidden);
  p.mlp_w2 = init_matrix(cfg.mlp_hidden, cfg.mlp_hidden, rng);
  p.mlp_b2 = Eigen::MatrixXd::Zero(1, cfg.mlp_hidden);
  p.mlp_w3 = init_matrix(cfg.mlp_hidden, h, rng);
  p.mlp_b3 = Eigen::MatrixXd::Zero(1, h);

  p.ctx_w1 = init_matrix(cfg.context_features, cfg.context_hidden, rng);
  p.ctx_b1 = Eigen::MatrixXd::Zero(1, cfg.context_hidden);
  p.ctx_w2 = init_matrix(cfg.context_hidden, h, rng);
  p.ctx_b2 = Eigen::MatrixXd::Zero(1, h);

  p.depot_embed = init_matrix(1, h, rng);
  p.key_w = init_matrix(h, h, rng);
  p.val_w = init_matrix(h, h, rng);
  p.out_w = init_matrix(h, h, rng);
  p.out_b = Eigen::MatrixXd::Zero(1, h);
  p.final_w = init_matrix(h, h, rng);

  p.critic_w1 = init_matrix(2 * h, cfg.critic_hidden, rng);
  p.critic_b1 = Eigen::MatrixXd::Zero(1, cfg.critic_hidden);
  p.critic_w2 = init_matrix(cfg.critic_hidden, 1, rng);
  p.critic_b2 = Eigen::MatrixXd::Zero(1, 1);
  return p;
}

void PolicyParams::for_each(
    const std::function<void(const std::string&, Eigen::MatrixXd&)>& fn) {
  fn("feat_w", feat_w);
  fn("feat_b", feat_b);
  for (size_t l = 0; l < caps_w.size(); ++l) {
    for (size_t m = 0; m < caps_w[l].size(); ++m)
      for (size_t k = 0; k < caps_w[l][m].size(); ++k)
        fn("caps_w.l" + std::to_string(l) + ".p" + std::to_string(m + 1) + ".k" +
               std::to_string(k),
           caps_w[l][m][k]);
    fn("proj_w.l" + std::to_string(l), proj_w[l]);
    fn("proj_b.l" + std::to_string(l), proj_b[l]);
  }
  fn("mlp_w1", mlp_w1);
  fn("mlp_b1", mlp_b1);
  fn("mlp_w2", mlp_w2);
  fn("mlp_b2", mlp_b2);
  fn("mlp_w3", mlp_w3);
  fn("mlp_b3", mlp_b3);
  fn("ctx_w1", ctx_w1);
  fn("ctx_b1", ctx_b1);
  fn("ctx_w2", ctx_w2);
  fn("ctx_b2", ctx_b2);
  fn("depot_embed", depot_embed);
  fn("key_w", key_w);
  fn("val_w", val_w);
  fn("out_w", out_w);
  fn("out_b", out_b);
  fn("final_w", final_w);
  fn("critic_w1", critic_w1);
  fn("critic_b1", critic_b1);
  fn("critic_w2", critic_w2);
  fn("critic_b2", critic_b2);
}

void PolicyParams::for_each(
    const std::function<void(const std::string&, const Eigen::MatrixXd&)>& fn) const {
  const_cast<PolicyParams*>(this)->for_each(
      [&fn](const std::string& n, Eigen::MatrixXd& m) { fn(n, m); });
}

size_t PolicyParams::tensor_count() const {
  size_t n = 0;
  for_each([&n](const std::string&, const Eigen::MatrixXd&) { ++n; });
  return n;
}

size_t PolicyParams::parameter_count() const {
  size_t n = 0;
  for_each([&n](const std::string&, const Eigen::MatrixXd& m) { n += m.size(); });
  return n;
}

void PolicyWork::reset(const PolicyParams& p) {
  tape.clear();
  param_vars.clear();
  params = &p;
  const_cast<PolicyParams&>(p).for_each([this](const std::string&, Eigen::MatrixXd& m) {
    param_vars.push_back(tape.leaf(m, /*needs_grad=*/true));
  });
}

namespace {

// Indices into the for_each order; kept in one place so PolicyWork lookups
// cannot drift from the enumeration.
struct ParamIndex {
  int feat_w, feat_b;
  std::vector<std::vector<std::vector<int>>> caps;
  std::vector<int> proj_w, proj_b;
  int mlp_w1, mlp_b1, mlp_w2, mlp_b2, mlp_w3, mlp_b3;
  int ctx_w1, ctx_b1, ctx_w2, ctx_b2;
  int depot, key_w, val_w, out_w, out_b, final_w;
  int critic_w1, critic_b1, critic_w2, critic_b2;

  static ParamIndex build(const PolicyConfig& cfg) {
    ParamIndex ix;
    int at = 0;
    ix.feat_w = at++;
    ix.feat_b = at++;
    ix.caps.resize(cfg.layers);
    ix.proj_w.resize(cfg.layers);
    ix.proj_b.resize(cfg.layers);
    for (int l = 0; l < cfg.layers; ++l) {
      ix.caps[l].resize(cfg.moments);
      for (int m = 0; m < cfg.moments; ++m) {
        ix.caps[l][m].resize(cfg.filter_degree + 1);
        for (int k = 0; k <= cfg.filter_degree; ++k) ix.caps[l][m][k] = at++;
      }
      ix.proj_w[l] = at++;
      ix.proj_b[l] = at++;
    }
    ix.mlp_w1 = at++;
    ix.mlp_b1 = at++;
    ix.mlp_w2 = at++;
    ix.mlp_b2 = at++;
    ix.mlp_w3 = at++;
    ix.mlp_b3 = at++;
    ix.ctx_w1 = at++;
    ix.ctx_b1 = at++;
    ix.ctx_w2 = at++;
    ix.ctx_b2 = at++;
    ix.depot = at++;
    ix.key_w = at++;
    ix.val_w = at++;
    ix.out_w = at++;
    ix.out_b = at++;
    ix.final_w = at++;
    ix.critic_w1 = at++;
    ix.critic_b1 = at++;
    ix.critic_w2 = at++;
    ix.critic_b2 = at++;
    return ix;
  }
};

ad::Var pv(const PolicyWork& w, int index) { return w.param_vars[index]; }

}  // namespace

ad::Var encode(PolicyWork& w, const Eigen::MatrixXd& features,
               const Eigen::MatrixXd& laplacian) {
  const PolicyConfig& cfg = w.params->cfg;
  ad::Tape& t = w.tape;
  const ParamIndex ix = ParamIndex::build(cfg);

  if (features.cols() != cfg.feature_dim)
    throw std::invalid_argument("encode: feature width mismatch");

  ad::Var x = t.leaf(features);

  if (cfg.variant == PolicyVariant::Mlp) {
    ad::Var h1 = t.relu(t.add_rowvec(t.matmul(x, pv(w, ix.mlp_w1)), pv(w, ix.mlp_b1)));
    ad::Var h2 = t.relu(t.add_rowvec(t.matmul(h1, pv(w, ix.mlp_w2)), pv(w, ix.mlp_b2)));
    return t.add_rowvec(t.matmul(h2, pv(w, ix.mlp_w3)), pv(w, ix.mlp_b3));
  }

  if (laplacian.rows() != features.rows() || laplacian.cols() != features.rows())
    throw std::invalid_argument("encode: laplacian shape mismatch");

  // Laplacian powers are constants on the tape.
  std::vector<ad::Var> lap_pow;
  lap_pow.reserve(cfg.filter_degree + 1);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(laplacian.rows(), laplacian.cols());
  for (int k = 0; k <= cfg.filter_degree; ++k) {
    lap_pow.push_back(t.leaf(acc));
    if (k < cfg.filter_degree) acc = acc * laplacian;
  }

  ad::Var f = t.add_rowvec(t.matmul(x, pv(w, ix.feat_w)), pv(w, ix.feat_b));
  for (int l = 0; l < cfg.layers; ++l) {
    std::vector<ad::Var> moments;
    moments.reserve(cfg.moments);
    for (int m = 0; m < cfg.moments; ++m) {
      ad::Var powered = t.epow(f, m + 1);
      ad::Var sum;
      for (int k = 0; k <= cfg.filter_degree; ++k) {
        ad::Var term = t.matmul(t.matmul(lap_pow[k], powered), pv(w, ix.caps[l][m][k]));
        sum = (k == 0) ? term : t.add(sum, term);
      }
      moments.push_back(t.relu(sum));
    }
    ad::Var cat = cfg.moments == 1 ? moments[0] : t.concat_cols(moments);
    f = t.add_rowvec(t.matmul(cat, pv(w, ix.proj_w[l])), pv(w, ix.proj_b[l]));
  }
  return f;
}

ad::Var build_context(PolicyWork& w, const Eigen::VectorXd& context) {
  const PolicyConfig& cfg = w.params->cfg;
  ad::Tape& t = w.tape;
  const ParamIndex ix = ParamIndex::build(cfg);
  if (context.size() != cfg.context_features)
    throw std::invalid_argument("build_context: context width mismatch");

  ad::Var c = t.leaf(context.transpose());
  ad::Var h = t.relu(t.add_rowvec(t.matmul(c, pv(w, ix.ctx_w1)), pv(w, ix.ctx_b1)));
  return t.add_rowvec(t.matmul(h, pv(w, ix.ctx_w2)), pv(w, ix.ctx_b2));
}

ad::Var decode(PolicyWork& w, ad::Var embeddings, ad::Var query,
               const std::vector<uint8_t>& mask) {
  const PolicyConfig& cfg = w.params->cfg;
  ad::Tape& t = w.tape;
  const ParamIndex ix = ParamIndex::build(cfg);

  const int n_actions = static_cast<int>(t.value(embeddings).rows()) + 1;
  if (static_cast<int>(mask.size()) != n_actions)
    throw std::invalid_argument("decode: mask length mismatch");
  if (!mask[kDepotNode]) throw std::logic_error("decode: depot must stay feasible");

  ad::Var nodes = t.concat_rows({pv(w, ix.depot), embeddings});
  ad::Var keys = t.matmul(nodes, pv(w, ix.key_w));
  ad::Var values = t.matmul(nodes, pv(w, ix.val_w));

  const int dh = cfg.hidden / cfg.heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<ad::Var> heads;
  heads.reserve(cfg.heads);
  for (int hd = 0; hd < cfg.heads; ++hd) {
    ad::Var q = t.slice_cols(query, hd * dh, dh);
    ad::Var kh = t.slice_cols(keys, hd * dh, dh);
    ad::Var vh = t.slice_cols(values, hd * dh, dh);
    ad::Var scores = t.scale(t.matmul_nt(q, kh), inv_sqrt_dh);
    ad::Var att = t.softmax_masked(scores, mask);
    heads.push_back(t.matmul(att, vh));
  }
  ad::Var glimpse = t.add_rowvec(
      t.matmul(cfg.heads == 1 ? heads[0] : t.concat_cols(heads), pv(w, ix.out_w)),
      pv(w, ix.out_b));

  const double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
  ad::Var logits = t.scale(t.matmul_nt(t.matmul(glimpse, pv(w, ix.final_w)), keys),
                           inv_sqrt_h);
  return t.softmax_masked(logits, mask);
}

ForwardResult policy_forward(PolicyWork& w, const Eigen::MatrixXd& features,
                             const Eigen::MatrixXd& laplacian,
                             const std::vector<uint8_t>& mask,
                             const Eigen::VectorXd& context) {
  const PolicyConfig& cfg = w.params->cfg;
  ad::Tape& t = w.tape;
  const ParamIndex ix = ParamIndex::build(cfg);

  ad::Var emb = encode(w, features, laplacian);
  ad::Var q = build_context(w, context);
  ad::Var probs = decode(w, emb, q, mask);

  ad::Var pooled = t.mean_rows(emb);
  ad::Var critic_in = t.concat_cols({q, pooled});
  ad::Var c1 = t.relu(t.add_rowvec(t.matmul(critic_in, pv(w, ix.critic_w1)),
                                   pv(w, ix.critic_b1)));
  ad::Var value = t.add_rowvec(t.matmul(c1, pv(w, ix.critic_w2)), pv(w, ix.critic_b2));
  return {probs, value};
}

Eigen::MatrixXd policy_laplacian(const TaskGraph& g, PolicyVariant variant,
                                 const TdConfig& td, TdCache* cache, int threads) {
  switch (variant) {
    case PolicyVariant::CapamTd: {
      const Eigen::MatrixXd affinity =
          cache ? cache->update(g, threads) : td_laplacian(g, td, threads);
      return graph_laplacian(affinity);
    }
    case PolicyVariant::Capam:
      return g.laplacian;
    case PolicyVariant::Mlp:
      return Eigen::MatrixXd::Zero(g.n, g.n);
  }
  return {};
}

// --- checkpoint io ---

namespace {
constexpr char kCheckpointMagic[8] = {'C', 'T', 'P', 'C', 'K', 'P', 'T', '\n'};

nlohmann::json config_to_json(const PolicyConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"feature_dim", c.feature_dim},
          {"hidden", c.hidden},
          {"layers", c.layers},
          {"moments", c.moments},
          {"filter_degree", c.filter_degree},
          {"heads", c.heads},
          {"context_features", c.context_features},
          {"context_hidden", c.context_hidden},
          {"critic_hidden", c.critic_hidden},
          {"mlp_hidden", c.mlp_hidden},
          {"td",
           {{"khop", c.td.khop},
            {"neighbor_threshold", c.td.neighbor_threshold},
            {"max_dim", c.td.max_dim},
            {"wasserstein_order", c.td.wasserstein_order}}}};
}

PolicyConfig config_from_json(const nlohmann::json& j) {
  PolicyConfig c;
  c.variant = policy_variant_from_string(j.at("variant").get<std::string>());
  c.feature_dim = j.at("feature_dim");
  c.hidden = j.at("hidden");
  c.layers = j.at("layers");
  c.moments = j.at("moments");
  c.filter_degree = j.at("filter_degree");
  c.heads = j.at("heads");
  c.context_features = j.at("context_features");
  c.context_hidden = j.at("context_hidden");
  c.critic_hidden = j.at("critic_hidden");
  c.mlp_hidden = j.at("mlp_hidden");
  c.td.khop = j.at("td").at("khop");
  c.td.neighbor_threshold = j.at("td").at("neighbor_threshold");
  c.td.max_dim = j.at("td").at("max_dim");
  c.td.wasserstein_order = j.at("td").at("wasserstein_order");
  return c;
}

}  // namespace

void save_checkpoint(const PolicyParams& params, const std::string& path,
                     const std::map<std::string, Eigen::MatrixXd>& extra_tensors,
                     const std::string& extra_json) {
  nlohmann::json header;
  header["version"] = 1;
  header["config"] = config_to_json(params.cfg);
  header["extra"] = nlohmann::json::parse(extra_json);

  nlohmann::json tensor_list = nlohmann::json::array();
  std::vector<const Eigen::MatrixXd*> order;
  params.for_each([&](const std::string& name, const Eigen::MatrixXd& m) {
    tensor_list.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    order.push_back(&m);
  });
  for (const auto& [name, m] : extra_tensors) {
    tensor_list.push_back(
        {{"name", "extra." + name}, {"rows", m.rows()}, {"cols", m.cols()}});
    order.push_back(&m);
  }
  header["tensors"] = tensor_list;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::string htext = header.dump();
  const uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(hlen));
  for (const Eigen::MatrixXd* m : order)
    for (Eigen::Index i = 0; i < m->rows(); ++i)
      for (Eigen::Index j = 0; j < m->cols(); ++j) {
        const double v = (*m)(i, j);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

PolicyParams load_checkpoint(const std::string& path,
                             std::map<std::string, Eigen::MatrixXd>* extra_tensors,
                             std::string* extra_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path);

  const nlohmann::json header = nlohmann::json::parse(htext);
  if (header.at("version") != 1) throw std::runtime_error("unsupported checkpoint version");
  PolicyParams params;
  params.cfg = config_from_json(header.at("config"));
  params = PolicyParams::init(params.cfg, 0);  // allocate shapes
  if (extra_json) *extra_json = header.at("extra").dump();

  std::map<std::string, Eigen::MatrixXd*> by_name;
  params.for_each([&](const std::string& name, Eigen::MatrixXd& m) { by_name[name] = &m; });

  for (const auto& tj : header.at("tensors")) {
    const std::string name = tj.at("name");
    const Eigen::Index rows = tj.at("rows");
    const Eigen::Index cols = tj.at("cols");
    Eigen::MatrixXd buf(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) {
        double v;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        buf(i, j) = v;
      }
    if (!in) throw std::runtime_error("truncated checkpoint tensors: " + path);
    if (name.rfind("extra.", 0) == 0) {
      if (extra_tensors) (*extra_tensors)[name.substr(6)] = std::move(buf);
    } else {
      auto it = by_name.find(name);
      if (it == by_name.end()) throw std::runtime_error("unknown tensor in checkpoint: " + name);
      if (it->second->rows() != rows || it->second->cols() != cols)
        throw std::runtime_error("tensor shape mismatch in checkpoint: " + name);
      *it->second = std::move(buf);
    }
  }
  return params;
}

// --- runner ---

PolicyRunner::PolicyRunner(const PolicyParams& params, Rng* sample_rng)
    : params_(params), variant_(params.cfg.variant), rng_(sample_rng) {}

void PolicyRunner::start_episode() { caches_.clear(); }

int PolicyRunner::decide(const Observation& obs) {
  const TaskGraph g = build_task_graph(obs.task_features);
  TdCache* cache = nullptr;
  if (variant_ == PolicyVariant::CapamTd)
    cache = &caches_.try_emplace(obs.robot, params_.cfg.td).first->second;
  const Eigen::MatrixXd lap = policy_laplacian(g, variant_, params_.cfg.td, cache);

  work_.reset(params_);
  const ForwardResult fr =
      policy_forward(work_, obs.task_features, lap, obs.feasible, obs.context);
  const Eigen::MatrixXd probs = work_.tape.value(fr.probs);
  return rng_ ? sample_from_probs(probs, *rng_) : argmax_probs(probs);
}

int sample_from_probs(const Eigen::MatrixXd& probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  int last_positive = 0;
  for (int j = 0; j < probs.cols(); ++j) {
    if (probs(0, j) <= 0.0) continue;
    last_positive = j;
    acc += probs(0, j);
    if (u < acc) return j;
  }
  return last_positive;
}

int argmax_probs(const Eigen::MatrixXd& probs) {
  int best = 0;
  for (int j = 1; j < probs.cols(); ++j)
    if (probs(0, j) > probs(0, best)) best = j;
  return best;
}

}  // namespace ctp
