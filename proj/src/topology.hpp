#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "taskgraph.hpp"

namespace ctp {

struct TdConfig {
  int khop = 1;                      // neighborhood hop count, >= 1
  double neighbor_threshold = 0.3;   // feature-space distance for 1-hop adjacency
  int max_dim = 1;                   // highest homology dimension (0 or 1)
  double wasserstein_order = 1.0;    // p >= 1
  enum class GroundMetric { Linf, L2 } ground = GroundMetric::Linf;
};

constexpr double kInfiniteDeath = std::numeric_limits<double>::infinity();

struct PersistencePair {
  double birth = 0.0;
  double death = kInfiniteDeath;

  bool essential() const { return death == kInfiniteDeath; }
  bool operator==(const PersistencePair&) const = default;
};

// Birth/death multisets per homology dimension. Finite pairs satisfy
// birth < death strictly; zero-persistence pairs are omitted.
struct PersistenceDiagram {
  std::array<std::vector<PersistencePair>, 2> dims;

  // Ref-qualified: calling at() on a temporary moves the bars out instead of
  // handing back a dangling reference.
  const std::vector<PersistencePair>& at(int d) const& { return dims[d]; }
  std::vector<PersistencePair> at(int d) && { return std::move(dims[d]); }
  void sort();
  bool operator==(const PersistenceDiagram&) const = default;
};

// Ordered Vietoris-Rips filtration: vertices at 0, edges at their pairwise
// distance, triangles at their longest edge. Simplices are sorted by
// (value, dimension, vertex order) so every face precedes its cofaces.
struct Filtration {
  struct Simplex {
    double value;
    int dim;                  // 0, 1, or 2
    std::array<int, 3> verts; // ascending; unused slots -1
  };
  std::vector<Simplex> simplices;
};

Filtration build_rips_filtration(const Eigen::MatrixXd& points, int max_dim);

// Persistence of the Vietoris-Rips filtration over Euclidean pairwise
// distances, computed by boundary-matrix column reduction over Z/2.
// H0 always carries exactly one essential class per connected component of
// the complete graph (i.e. one, since every edge eventually appears).
// Throws on an empty point set. max_dim must be 0 or 1.
PersistenceDiagram rips_persistence(const Eigen::MatrixXd& points, int max_dim);

// p-Wasserstein cost of the optimal partial matching between two diagrams of
// one homology dimension; unmatched points pay their distance to the
// diagonal. Infinite deaths are truncated to the largest finite value present
// in either diagram before matching.
double wasserstein_distance(const std::vector<PersistencePair>& a,
                            const std::vector<PersistencePair>& b, const TdConfig& cfg);

// Combined distance over homology dimensions 0..max_dim: the matching never
// crosses dimensions, so the total is (sum of per-dimension costs^p)^(1/p).
double diagram_distance(const PersistenceDiagram& a, const PersistenceDiagram& b,
                        const TdConfig& cfg);

// Bottleneck (infinity-Wasserstein) distance with the L-inf ground metric.
double bottleneck_distance(const std::vector<PersistencePair>& a,
                           const std::vector<PersistencePair>& b);

// Nodes reachable from `node` within cfg.khop hops, where j neighbors i iff
// the feature distance is strictly below cfg.neighbor_threshold. Sorted;
// always contains `node`.
std::vector<int> khop_subgraph(const TaskGraph& g, int node, const TdConfig& cfg);

// Topological-descriptor affinity matrix: entry (i, j) is
// 1 / (1 + distance between the persistence diagrams of the two nodes'
// k-hop neighborhoods). Symmetric, unit diagonal, entries in (0, 1].
// `threads` parallelizes the per-node diagram computations.
Eigen::MatrixXd td_laplacian(const TaskGraph& g, const TdConfig& cfg, int threads = 1);

// Per-node diagram dump: "node <i>" then one "<dim> <birth> <death>" triple
// per bar (death "inf" for essential classes). For cross-validation against
// external TDA tools.
void dump_diagrams(const TaskGraph& g, const TdConfig& cfg, const std::string& path);

// Incremental td_laplacian: per-node diagrams and pairwise distances are
// re-computed only when a neighborhood's point set actually changed (content
// hash). Worth it because only a handful of remaining-demand values move
// between consecutive decisions.
class TdCache {
public:
  explicit TdCache(TdConfig cfg) : cfg_(cfg) {}

  const Eigen::MatrixXd& update(const TaskGraph& g, int threads = 1);
  const Eigen::MatrixXd& matrix() const { return affinity_; }

  long diagrams_computed() const { return diagrams_computed_; }
  long pairs_computed() const { return pairs_computed_; }
  void reset();

private:
  TdConfig cfg_;
  std::vector<uint64_t> hashes_;
  std::vector<PersistenceDiagram> diagrams_;
  Eigen::MatrixXd affinity_;
  long diagrams_computed_ = 0;
  long pairs_computed_ = 0;
};

}  // namespace ctp
