#pragma once

#include <cstddef>
#include <vector>

#include "turtle/common.hpp"

namespace turtle {

// Probability vectors are plain std::vector<double>; validate_simplex
// checks the simplex invariants where an operation requires them.
void validate_simplex(const std::vector<double>& p, double tol = 1e-9);

std::vector<double> softmax(const std::vector<double>& logits);

// Euclidean projection onto the probability simplex. Exact closed form:
// sort descending, keep the largest k with 1 + k*z_(k) > sum_{j<=k} z_(j),
// threshold t = (sum_{j<=k} z_(j) - 1)/k, output max(z_i - t, 0).
std::vector<double> sparsemax(const std::vector<double>& logits);

// J^T * upstream for the sparsemax Jacobian at `logits`: entries in the
// support get u_i - mean_support(u), entries outside get 0.
std::vector<double> sparsemax_vjp(const std::vector<double>& logits, const std::vector<double>& upstream);

// Shannon entropy, 0*ln(0) = 0. Negative entries are a contract violation.
double entropy(const std::vector<double>& p);

// KL(p || q) with the 0*ln(0) convention; q must be positive wherever p is.
double kl_div(const std::vector<double>& p, const std::vector<double>& q);

// p(c) proportional to c^-alpha over c = 1..C, normalized to sum to 1.
std::vector<double> powerlaw_pmf(std::uint32_t num_classes, double alpha);

// Clamp used inside logarithms when differentiating KL terms; value
// computations keep the exact convention.
inline constexpr double kKlLogClamp = 1e-12;

}  // namespace turtle
