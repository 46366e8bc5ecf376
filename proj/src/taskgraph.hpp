#pragma once

#include <string>

#include <Eigen/Core>

namespace ctp {

// Complete weighted graph over the task set. Node features are the normalized
// [x, y, deadline, remaining-demand] vectors; the adjacency weight between two
// nodes is 1 / (1 + ||delta_i - delta_j||). Snapshots are immutable.
struct TaskGraph {
  int n = 0;
  Eigen::MatrixXd features;   // n x 4
  Eigen::MatrixXd adjacency;  // n x n, symmetric, unit diagonal
  Eigen::MatrixXd laplacian;  // n x n, symmetric-normalized

  long edge_count() const { return static_cast<long>(n) * (n - 1) / 2; }
};

double edge_weight(const Eigen::Vector4d& a, const Eigen::Vector4d& b);

// Symmetric-normalized Laplacian I - D^{-1/2} A D^{-1/2} of a symmetric
// adjacency with positive diagonal; eigenvalues lie in [0, 2]. Throws on a
// non-positive weighted degree.
Eigen::MatrixXd graph_laplacian(const Eigen::MatrixXd& adjacency);

// Builds the full graph from an n x 4 normalized feature matrix. Throws on an
// empty input. Completed or missed tasks stay in the graph (their remaining
// demand frozen); exclusion is the decoder mask's job.
TaskGraph build_task_graph(const Eigen::MatrixXd& features);

// Debug dump of the dense adjacency, one row per line.
void dump_adjacency(const TaskGraph& g, const std::string& path);

}  // namespace ctp
