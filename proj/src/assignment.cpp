#include "assignment.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctp {

double min_cost_assignment(const Eigen::MatrixXd& cost, std::vector<int>& row_to_col,
                           std::vector<double>* row_duals, std::vector<double>* col_duals) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("cost matrix must be square");
  row_to_col.assign(n, -1);
  if (n == 0) return 0.0;

  const double inf = std::numeric_limits<double>::infinity();
  // Shortest augmenting path with dual potentials, 1-indexed with a virtual
  // column 0 hosting the row currently being inserted.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  double total = 0.0;
  for (int j = 1; j <= n; ++j) {
    row_to_col[p[j] - 1] = j - 1;
    total += cost(p[j] - 1, j - 1);
  }
  if (row_duals) row_duals->assign(u.begin() + 1, u.end());
  if (col_duals) col_duals->assign(v.begin() + 1, v.end());
  return total;
}

namespace {

// Forces the given (row, col) pairs and re-solves. Used only to confirm that
// a tied edge really participates in some optimum.
double solve_with_fixed(const Eigen::MatrixXd& cost,
                        const std::vector<std::pair<int, int>>& fixed,
                        std::vector<int>& row_to_col) {
  Eigen::MatrixXd c = cost;
  const int n = static_cast<int>(cost.rows());
  for (auto [fr, fc] : fixed) {
    for (int j = 0; j < n; ++j)
      if (j != fc) c(fr, j) = kForbiddenCost;
    for (int i = 0; i < n; ++i)
      if (i != fr) c(i, fc) = kForbiddenCost;
  }
  return min_cost_assignment(c, row_to_col);
}

}  // namespace

double max_weight_matching(const Eigen::MatrixXd& weights, std::vector<int>& row_to_col) {
  const int m = static_cast<int>(weights.rows());
  const int k = static_cast<int>(weights.cols());
  row_to_col.assign(m, -1);
  if (m == 0 || k == 0) return 0.0;

  // Pad to square: every real row/column gets a private dummy partner so
  // "unmatched" costs zero; real pairs cost -weight. Negative-weight pairs are
  // then never chosen over staying unmatched.
  const int n = m + k;
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(n, n, kForbiddenCost);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j)
      if (std::isfinite(weights(i, j))) cost(i, j) = -weights(i, j);
  for (int i = 0; i < m; ++i) cost(i, k + i) = 0.0;
  for (int j = 0; j < k; ++j) cost(m + j, j) = 0.0;
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < m; ++i) cost(m + j, k + i) = 0.0;

  std::vector<int> current;
  std::vector<double> u, v;
  const double best = min_cost_assignment(cost, current, &u, &v);
  const double tol = 1e-9 * (1.0 + std::abs(best));

  // Ties: prefer the lexicographically smallest assignment vector (row order,
  // low columns first, unmatched last). An edge can only appear in an optimal
  // solution if its reduced cost is zero, so generic weights never trigger the
  // confirmation re-solves below.
  std::vector<std::pair<int, int>> fixed;
  for (int r = 0; r < m; ++r) {
    const int cur = current[r];
    const int cur_rank = (cur < k) ? cur : k;
    int chosen = cur;
    for (int cand = 0; cand < cur_rank; ++cand) {
      if (!std::isfinite(weights(r, cand))) continue;
      if (cost(r, cand) - u[r] - v[cand] > tol) continue;
      bool taken = false;
      for (auto [fr, fc] : fixed) taken = taken || fc == cand;
      if (taken) continue;
      auto trial = fixed;
      trial.emplace_back(r, cand);
      std::vector<int> re;
      if (solve_with_fixed(cost, trial, re) <= best + tol) {
        chosen = cand;
        current = re;
        break;
      }
    }
    fixed.emplace_back(r, chosen < k ? chosen : k + r);
  }

  double total = 0.0;
  for (int r = 0; r < m; ++r) {
    const int c = current[r];
    if (c < k && std::isfinite(weights(r, c))) {
      row_to_col[r] = c;
      total += weights(r, c);
    }
  }
  return total;
}

}  // namespace ctp
