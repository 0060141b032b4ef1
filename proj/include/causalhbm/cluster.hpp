#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "causalhbm/transport.hpp"

namespace causalhbm {

struct GroupAssignment {
    int C = 1;
    std::vector<int> labels;
};

void validate(const GroupAssignment& a);

// Reciprocal affinity 1 / (d + eps) off the diagonal; the diagonal is zero.
Eigen::MatrixXd affinity(const DistanceMatrix& d, double eps = 1e-8);

// Normalized spectral clustering: symmetric normalized Laplacian, the C
// smallest eigenvectors row-normalized, then seeded k-means++ (20 restarts,
// 300 iterations, tolerance 1e-8).
GroupAssignment spectral_cluster(const Eigen::MatrixXd& affinity, int C, std::uint64_t seed);

// Label of the nearest task (ties break toward the lowest index).
int assign_new_task(const Eigen::VectorXd& distances_to_train, const GroupAssignment& trained);

// Macro-averaged F1 over true groups after the label matching that maximizes
// total agreement (optimal assignment on the contingency table).
double group_recovery_f1(const std::vector<int>& predicted, const std::vector<int>& truth);

// Micro variant (overall agreement under the same matching), reported
// alongside the macro score.
double group_recovery_f1_micro(const std::vector<int>& predicted, const std::vector<int>& truth);

}  // namespace causalhbm
