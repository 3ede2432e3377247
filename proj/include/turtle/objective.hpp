#pragma once

#include <cstdint>
#include <vector>

#include "turtle/common.hpp"
#include "turtle/kernels.hpp"

namespace turtle {

// tau_theta(z) = A z + b
struct Classifier {
  Matrix A;               // C x d
  std::vector<double> b;  // C
};

// Max-margin hyperplane on bias-augmented features [z;1].
struct Hyperplane {
  Matrix W;  // C x (d+1)
};

enum class TargetMode { softmax, sparsemax };

TargetMode parse_target_mode(const std::string& s);
const char* target_mode_name(TargetMode m);

// Classifier packed into hyperplane form (bias as the last column) and back.
Matrix pack_classifier(const Classifier& theta);
Classifier unpack_classifier(const Matrix& wb);

struct WLossGrad {
  double loss = 0.0;
  Matrix grad;  // C x (d+1)
};

// Mean cross entropy of softmax(W z~) against fixed target rows, with its
// analytic gradient (1/B) sum_n (softmax(W z~_n) - t_n) z~_n^T.
WLossGrad ce_loss_grad_w(const Hyperplane& w, const BatchRef& batch, const Matrix& targets);

// M plain gradient-descent steps on ce_loss_grad_w from w0, targets fixed.
Hyperplane inner_solve(const Hyperplane& w0, const BatchRef& batch, const Matrix& targets,
                       int steps, double eta);

// Per-sample gradient of the (unnormalized) cross entropy in the target
// distribution: row n is -ln softmax(W z~_n).
Matrix target_ce_grad(const Hyperplane& w, const BatchRef& batch);

struct OuterResult {
  double loss = 0.0;
  double kl_term = 0.0;  // the gamma-weighted regularizer contribution
  Matrix grad_a;         // C x d
  std::vector<double> grad_b;
};

// Outer objective: mean CE of softmax(W z~) against mode(tau_theta(z)),
// plus gamma * KL(tau_bar || prior). w is held constant; the gradient in
// theta chains through the mode's Jacobian and through the softmax mean
// tau_bar. When kl_sparse_mean is set, tau_bar uses sparsemax rows instead
// of softmax rows (ablation).
OuterResult outer_loss_grad_theta(const Classifier& theta, const Hyperplane& w,
                                  const BatchRef& batch, double gamma,
                                  const std::vector<double>& prior, TargetMode mode,
                                  bool kl_sparse_mean = false);

// Entropy-regularized variant: mean CE - gamma * H(tau_bar). Kept to verify
// the KL(p||U) = ln C - H(p) bridge against the uniform-prior objective.
OuterResult entropy_objective_grad_theta(const Classifier& theta, const Hyperplane& w,
                                         const BatchRef& batch, double gamma,
                                         TargetMode mode = TargetMode::softmax);

}  // namespace turtle
