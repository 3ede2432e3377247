#pragma once

#include <cstdint>
#include <vector>

#include "turtle/common.hpp"

namespace turtle {

struct Matching {
  std::vector<std::uint32_t> perm;  // predicted cluster index -> class index
  double total_cost = 0.0;
};

// Minimum-cost assignment on a square cost matrix, O(C^3). Among all
// optimal assignments, returns the lexicographically smallest perm.
Matching hungarian(const Matrix& cost);

// Matched accuracy: Hungarian on the negated count matrix, then
// matched count / N.
std::pair<double, Matching> cluster_accuracy(const std::vector<std::uint32_t>& pred,
                                             const std::vector<std::uint32_t>& truth,
                                             std::uint32_t num_classes);

// Count matrix with rows relabeled through the matching; rows are matched
// predicted clusters, columns are ground truth.
Matrix confusion_matrix(const std::vector<std::uint32_t>& pred,
                        const std::vector<std::uint32_t>& truth,
                        const Matching& matching);

}  // namespace turtle
