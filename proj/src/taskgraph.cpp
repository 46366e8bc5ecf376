#include "taskgraph.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace ctp {

double edge_weight(const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
  return 1.0 / (1.0 + (a - b).norm());
}

Eigen::MatrixXd graph_laplacian(const Eigen::MatrixXd& adjacency) {
  const Eigen::Index n = adjacency.rows();
  if (n == 0 || adjacency.cols() != n)
    throw std::invalid_argument("adjacency must be square and non-empty");

  Eigen::VectorXd degree = adjacency.rowwise().sum();
  for (Eigen::Index i = 0; i < n; ++i)
    if (degree(i) <= 0.0) throw std::invalid_argument("zero weighted degree");

  Eigen::VectorXd inv_sqrt = degree.array().rsqrt();
  Eigen::MatrixXd lap =
      Eigen::MatrixXd::Identity(n, n) -
      (inv_sqrt.asDiagonal() * adjacency * inv_sqrt.asDiagonal());

  // Mirror the upper triangle so symmetry holds bitwise.
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) lap(j, i) = lap(i, j);
  return lap;
}

TaskGraph build_task_graph(const Eigen::MatrixXd& features) {
  if (features.rows() == 0) throw std::invalid_argument("empty graph");
  if (features.cols() != 4) throw std::invalid_argument("node features must have 4 columns");

  TaskGraph g;
  g.n = static_cast<int>(features.rows());
  g.features = features;
  g.adjacency.resize(g.n, g.n);
  for (int i = 0; i < g.n; ++i) {
    g.adjacency(i, i) = 1.0;
    for (int j = i + 1; j < g.n; ++j) {
      const double w = edge_weight(features.row(i), features.row(j));
      g.adjacency(i, j) = w;
      g.adjacency(j, i) = w;
    }
  }
  g.laplacian = graph_laplacian(g.adjacency);
  return g;
}

void dump_adjacency(const TaskGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  char buf[32];
  for (int i = 0; i < g.n; ++i) {
    for (int j = 0; j < g.n; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", g.adjacency(i, j));
      out << buf << (j + 1 == g.n ? "\n" : " ");
    }
  }
}

}  // namespace ctp
