#include "topology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "assignment.hpp"
#include "threading.hpp"

namespace ctp {

void PersistenceDiagram::sort() {
  for (auto& v : dims)
    std::sort(v.begin(), v.end(), [](const PersistencePair& a, const PersistencePair& b) {
      return a.birth != b.birth ? a.birth < b.birth : a.death < b.death;
    });
}

Filtration build_rips_filtration(const Eigen::MatrixXd& points, int max_dim) {
  const int n = static_cast<int>(points.rows());
  Filtration f;
  f.simplices.reserve(n + n * (n - 1) / 2 +
                      (max_dim >= 1 ? n * (n - 1) * (n - 2) / 6 : 0));

  for (int i = 0; i < n; ++i) f.simplices.push_back({0.0, 0, {i, -1, -1}});

  Eigen::MatrixXd dist(n, n);
  for (int i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double d = (points.row(i) - points.row(j)).norm();
      dist(i, j) = d;
      dist(j, i) = d;
      f.simplices.push_back({d, 1, {i, j, -1}});
    }
  }
  if (max_dim >= 1) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
          const double d = std::max({dist(i, j), dist(i, k), dist(j, k)});
          f.simplices.push_back({d, 2, {i, j, k}});
        }
  }

  std::sort(f.simplices.begin(), f.simplices.end(),
            [](const Filtration::Simplex& a, const Filtration::Simplex& b) {
              if (a.value != b.value) return a.value < b.value;
              if (a.dim != b.dim) return a.dim < b.dim;
              return a.verts < b.verts;
            });
  return f;
}

PersistenceDiagram rips_persistence(const Eigen::MatrixXd& points, int max_dim) {
  if (points.rows() == 0) throw std::invalid_argument("empty point set");
  if (max_dim < 0 || max_dim > 1) throw std::invalid_argument("max_dim must be 0 or 1");

  const Filtration f = build_rips_filtration(points, max_dim);
  const int n_simplices = static_cast<int>(f.simplices.size());
  const int n = static_cast<int>(points.rows());

  // Face lookup: position of each vertex / edge in the sorted order.
  std::vector<int> vertex_pos(n, -1);
  std::unordered_map<long long, int> edge_pos;
  edge_pos.reserve(static_cast<size_t>(n) * n);
  for (int s = 0; s < n_simplices; ++s) {
    const auto& sx = f.simplices[s];
    if (sx.dim == 0) vertex_pos[sx.verts[0]] = s;
    if (sx.dim == 1) edge_pos[static_cast<long long>(sx.verts[0]) * n + sx.verts[1]] = s;
  }

  // Column reduction over Z/2. Columns are sorted index lists; the pivot is
  // the largest face index.
  std::vector<std::vector<int>> reduced(n_simplices);
  std::vector<int> pivot_owner(n_simplices, -1);
  std::vector<char> destroyed(n_simplices, 0);

  auto xor_into = [](std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    out.reserve(a.size() + b.size());
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(),
                                  std::back_inserter(out));
    a = std::move(out);
  };

  PersistenceDiagram pd;
  for (int s = 0; s < n_simplices; ++s) {
    const auto& sx = f.simplices[s];
    std::vector<int> col;
    if (sx.dim == 1) {
      col = {vertex_pos[sx.verts[0]], vertex_pos[sx.verts[1]]};
    } else if (sx.dim == 2) {
      col = {edge_pos.at(static_cast<long long>(sx.verts[0]) * n + sx.verts[1]),
             edge_pos.at(static_cast<long long>(sx.verts[0]) * n + sx.verts[2]),
             edge_pos.at(static_cast<long long>(sx.verts[1]) * n + sx.verts[2])};
    }
    std::sort(col.begin(), col.end());

    while (!col.empty() && pivot_owner[col.back()] != -1)
      xor_into(col, reduced[pivot_owner[col.back()]]);

    if (!col.empty()) {
      const int pivot = col.back();
      pivot_owner[pivot] = s;
      destroyed[pivot] = 1;
      const int dim = f.simplices[pivot].dim;
      const double birth = f.simplices[pivot].value;
      const double death = sx.value;
      if (dim <= max_dim && death > birth) pd.dims[dim].push_back({birth, death});
      reduced[s] = std::move(col);
    }
  }
  // Creators reduced to an empty column; the ones never taken as a pivot are
  // essential classes.
  for (int s = 0; s < n_simplices; ++s) {
    const auto& sx = f.simplices[s];
    if (sx.dim > max_dim) continue;
    if (reduced[s].empty() && !destroyed[s])
      pd.dims[sx.dim].push_back({sx.value, kInfiniteDeath});
  }
  pd.sort();
  return pd;
}

namespace {

double diagonal_gap(const PersistencePair& p, TdConfig::GroundMetric ground) {
  const double half = (p.death - p.birth) / 2.0;
  return ground == TdConfig::GroundMetric::Linf ? half : half * std::sqrt(2.0);
}

double ground_distance(const PersistencePair& a, const PersistencePair& b,
                       TdConfig::GroundMetric ground) {
  const double db = std::abs(a.birth - b.birth);
  const double dd = std::abs(a.death - b.death);
  return ground == TdConfig::GroundMetric::Linf ? std::max(db, dd)
                                                : std::hypot(db, dd);
}

std::vector<PersistencePair> truncate_essentials(const std::vector<PersistencePair>& in,
                                                 double ceiling) {
  std::vector<PersistencePair> out;
  out.reserve(in.size());
  for (const auto& p : in)
    out.push_back({p.birth, p.essential() ? std::max(ceiling, p.birth) : p.death});
  return out;
}

double max_finite_value(const std::vector<PersistencePair>& d, double acc) {
  for (const auto& p : d) {
    acc = std::max(acc, p.birth);
    if (!p.essential()) acc = std::max(acc, p.death);
  }
  return acc;
}

}  // namespace

double wasserstein_distance(const std::vector<PersistencePair>& a_in,
                            const std::vector<PersistencePair>& b_in,
                            const TdConfig& cfg) {
  const double p = cfg.wasserstein_order;
  if (p < 1.0) throw std::invalid_argument("wasserstein order must be >= 1");

  const double ceiling = max_finite_value(b_in, max_finite_value(a_in, 0.0));
  const std::vector<PersistencePair> a = truncate_essentials(a_in, ceiling);
  const std::vector<PersistencePair> b = truncate_essentials(b_in, ceiling);

  const int na = static_cast<int>(a.size());
  const int nb = static_cast<int>(b.size());
  if (na == 0 && nb == 0) return 0.0;

  // Rows: a-points then nb diagonal slots. Cols: b-points then na diagonal
  // slots. Each real point may use only its own diagonal slot.
  const int n = na + nb;
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(n, n, kForbiddenCost);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j)
      cost(i, j) = std::pow(ground_distance(a[i], b[j], cfg.ground), p);
  for (int i = 0; i < na; ++i) cost(i, nb + i) = std::pow(diagonal_gap(a[i], cfg.ground), p);
  for (int j = 0; j < nb; ++j) cost(na + j, j) = std::pow(diagonal_gap(b[j], cfg.ground), p);
  for (int j = 0; j < nb; ++j)
    for (int i = 0; i < na; ++i) cost(na + j, nb + i) = 0.0;

  std::vector<int> matching;
  const double total = min_cost_assignment(cost, matching);
  return std::pow(total, 1.0 / p);
}

double diagram_distance(const PersistenceDiagram& a, const PersistenceDiagram& b,
                        const TdConfig& cfg) {
  const double p = cfg.wasserstein_order;
  double acc = 0.0;
  for (int d = 0; d <= cfg.max_dim; ++d)
    acc += std::pow(wasserstein_distance(a.at(d), b.at(d), cfg), p);
  return std::pow(acc, 1.0 / p);
}

double bottleneck_distance(const std::vector<PersistencePair>& a_in,
                           const std::vector<PersistencePair>& b_in) {
  TdConfig cfg;  // Linf ground metric
  const double ceiling = max_finite_value(b_in, max_finite_value(a_in, 0.0));
  const std::vector<PersistencePair> a = truncate_essentials(a_in, ceiling);
  const std::vector<PersistencePair> b = truncate_essentials(b_in, ceiling);
  const int na = static_cast<int>(a.size());
  const int nb = static_cast<int>(b.size());
  if (na == 0 && nb == 0) return 0.0;

  std::vector<double> candidates = {0.0};
  for (int i = 0; i < na; ++i) {
    candidates.push_back(diagonal_gap(a[i], cfg.ground));
    for (int j = 0; j < nb; ++j)
      candidates.push_back(ground_distance(a[i], b[j], cfg.ground));
  }
  for (int j = 0; j < nb; ++j) candidates.push_back(diagonal_gap(b[j], cfg.ground));
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  const int n = na + nb;
  auto feasible = [&](double c) {
    Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(n, n, kForbiddenCost);
    const double slack = c * (1.0 + 1e-12) + 1e-300;
    for (int i = 0; i < na; ++i)
      for (int j = 0; j < nb; ++j)
        if (ground_distance(a[i], b[j], cfg.ground) <= slack) cost(i, j) = 0.0;
    for (int i = 0; i < na; ++i)
      if (diagonal_gap(a[i], cfg.ground) <= slack) cost(i, nb + i) = 0.0;
    for (int j = 0; j < nb; ++j)
      if (diagonal_gap(b[j], cfg.ground) <= slack) cost(na + j, j) = 0.0;
    for (int j = 0; j < nb; ++j)
      for (int i = 0; i < na; ++i) cost(na + j, nb + i) = 0.0;
    std::vector<int> matching;
    return min_cost_assignment(cost, matching) < kForbiddenCost / 2;
  };

  int lo = 0, hi = static_cast<int>(candidates.size()) - 1;
  while (lo < hi) {
    const int mid = (lo + hi) / 2;
    if (feasible(candidates[mid]))
      hi = mid;
    else
      lo = mid + 1;
  }
  return candidates[lo];
}

std::vector<int> khop_subgraph(const TaskGraph& g, int node, const TdConfig& cfg) {
  if (node < 0 || node >= g.n) throw std::invalid_argument("node out of range");

  std::vector<char> in_set(g.n, 0);
  in_set[node] = 1;
  std::deque<std::pair<int, int>> queue{{node, 0}};
  while (!queue.empty()) {
    auto [cur, depth] = queue.front();
    queue.pop_front();
    if (depth >= cfg.khop) continue;
    for (int j = 0; j < g.n; ++j) {
      if (in_set[j]) continue;
      const double d = (g.features.row(cur) - g.features.row(j)).norm();
      if (d < cfg.neighbor_threshold) {
        in_set[j] = 1;
        queue.emplace_back(j, depth + 1);
      }
    }
  }
  std::vector<int> out;
  for (int j = 0; j < g.n; ++j)
    if (in_set[j]) out.push_back(j);
  return out;
}

namespace {

Eigen::MatrixXd neighborhood_points(const TaskGraph& g, const std::vector<int>& nodes) {
  Eigen::MatrixXd pts(nodes.size(), g.features.cols());
  for (size_t r = 0; r < nodes.size(); ++r) pts.row(r) = g.features.row(nodes[r]);
  return pts;
}

uint64_t hash_points(const Eigen::MatrixXd& pts) {
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  mix(static_cast<uint64_t>(pts.rows()));
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      double v = pts(i, j);
      uint64_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(bits));
      mix(bits);
    }
  return h;
}

}  // namespace

Eigen::MatrixXd td_laplacian(const TaskGraph& g, const TdConfig& cfg, int threads) {
  std::vector<PersistenceDiagram> diagrams(g.n);
  parallel_for(g.n, threads, [&](int begin, int end, int) {
    for (int i = begin; i < end; ++i)
      diagrams[i] = rips_persistence(neighborhood_points(g, khop_subgraph(g, i, cfg)),
                                     cfg.max_dim);
  });

  Eigen::MatrixXd out(g.n, g.n);
  out.setIdentity();
  parallel_for(g.n, threads, [&](int begin, int end, int) {
    for (int i = begin; i < end; ++i) {
      out(i, i) = 1.0;
      for (int j = 0; j < g.n; ++j) {
        if (j <= i) continue;
        out(i, j) = 1.0 / (1.0 + diagram_distance(diagrams[i], diagrams[j], cfg));
      }
    }
  });
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < i; ++j) out(i, j) = out(j, i);
  return out;
}

void dump_diagrams(const TaskGraph& g, const TdConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  char buf[96];
  for (int i = 0; i < g.n; ++i) {
    const PersistenceDiagram pd =
        rips_persistence(neighborhood_points(g, khop_subgraph(g, i, cfg)), cfg.max_dim);
    out << "node " << i << "\n";
    for (int d = 0; d <= cfg.max_dim; ++d)
      for (const PersistencePair& p : pd.at(d)) {
        if (p.essential())
          std::snprintf(buf, sizeof(buf), "%d %.17g inf\n", d, p.birth);
        else
          std::snprintf(buf, sizeof(buf), "%d %.17g %.17g\n", d, p.birth, p.death);
        out << buf;
      }
  }
}

void TdCache::reset() {
  hashes_.clear();
  diagrams_.clear();
  affinity_.resize(0, 0);
  diagrams_computed_ = 0;
  pairs_computed_ = 0;
}

const Eigen::MatrixXd& TdCache::update(const TaskGraph& g, int threads) {
  const bool fresh = static_cast<int>(hashes_.size()) != g.n;
  if (fresh) {
    hashes_.assign(g.n, 0);
    diagrams_.assign(g.n, {});
    affinity_ = Eigen::MatrixXd::Identity(g.n, g.n);
  }

  std::vector<Eigen::MatrixXd> points(g.n);
  std::vector<char> changed(g.n, 0);
  for (int i = 0; i < g.n; ++i) {
    points[i] = neighborhood_points(g, khop_subgraph(g, i, cfg_));
    const uint64_t h = hash_points(points[i]);
    if (fresh || h != hashes_[i]) {
      changed[i] = 1;
      hashes_[i] = h;
    }
  }

  std::vector<int> dirty;
  for (int i = 0; i < g.n; ++i)
    if (changed[i]) dirty.push_back(i);

  parallel_for(static_cast<int>(dirty.size()), threads, [&](int begin, int end, int) {
    for (int k = begin; k < end; ++k) {
      const int i = dirty[k];
      diagrams_[i] = rips_persistence(points[i], cfg_.max_dim);
    }
  });
  diagrams_computed_ += static_cast<long>(dirty.size());

  parallel_for(static_cast<int>(dirty.size()), threads, [&](int begin, int end, int) {
    for (int k = begin; k < end; ++k) {
      const int i = dirty[k];
      for (int j = 0; j < g.n; ++j) {
        if (j == i) continue;
        // Pair (i, j) with j also dirty is recomputed once, by the lower index.
        if (changed[j] && j < i) continue;
        const double d = diagram_distance(diagrams_[i], diagrams_[j], cfg_);
        affinity_(i, j) = 1.0 / (1.0 + d);
        affinity_(j, i) = affinity_(i, j);
      }
    }
  });
  for (int i : dirty)
    for (int j = 0; j < g.n; ++j)
      if (j != i && !(changed[j] && j < i)) ++pairs_computed_;

  return affinity_;
}

}  // namespace ctp
