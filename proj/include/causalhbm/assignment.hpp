#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace causalhbm {

// Exact minimum-cost perfect assignment (shortest augmenting paths with
// potentials). Returns the total cost; row_to_col, when given, receives the
// matched column of each row.
double solve_assignment(const Eigen::MatrixXd& cost, std::vector<int>* row_to_col = nullptr);

// Exact balanced transportation problem: minimize sum f_ij * cost(i, j)
// subject to row sums = supply, column sums = demand, f >= 0 integral.
// Supplies and demands must balance.
double solve_transport(const Eigen::MatrixXd& cost, const std::vector<long long>& supply,
                       const std::vector<long long>& demand);

}  // namespace causalhbm
