#pragma once

#include <vector>

#include <Eigen/Core>

namespace ctp {

// Exact min-cost perfect assignment on a square cost matrix (shortest
// augmenting path with potentials, O(n^3)). Entries >= kForbiddenCost mark
// disallowed pairs. Returns the total cost; row_to_col receives the matching.
// Optional outputs: the optimal dual potentials.
inline constexpr double kForbiddenCost = 1e15;

double min_cost_assignment(const Eigen::MatrixXd& cost, std::vector<int>& row_to_col,
                           std::vector<double>* row_duals = nullptr,
                           std::vector<double>* col_duals = nullptr);

// Maximum-weight matching of a (possibly rectangular) weight matrix where
// non-finite entries mark absent pairs. Not every row needs a partner: pairs
// with negative weight are left unmatched. Among maximum-weight matchings the
// lexicographically smallest assignment vector (ordered by row, then column)
// is returned; row_to_col is -1 for unmatched rows. Weights within 1e-9 of
// the optimum are treated as ties.
double max_weight_matching(const Eigen::MatrixXd& weights, std::vector<int>& row_to_col);

}  // namespace ctp
