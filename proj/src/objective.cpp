#include "turtle/objective.hpp"

#include <cmath>

#include "turtle/simplex.hpp"

namespace turtle {

namespace {

double ordered_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// upstream through the squashing map, one batch row at a time
void chain_through_mode(TargetMode mode, const Matrix& logits, const Matrix& mode_probs,
                        const Matrix& upstream, Matrix& out) {
  const std::size_t b = logits.rows;
  const std::size_t c = logits.cols;
  out = Matrix(b, c);
  for (std::size_t n = 0; n < b; ++n) {
    const double* g = upstream.row(n);
    double* o = out.row(n);
    if (mode == TargetMode::softmax) {
      // J^T g = p (.) g - p (p . g)
      const double* p = mode_probs.row(n);
      double dot = 0.0;
      for (std::size_t k = 0; k < c; ++k) dot += p[k] * g[k];
      for (std::size_t k = 0; k < c; ++k) o[k] = p[k] * (g[k] - dot);
    } else {
      // support-mean centering on the sparsemax support, zero elsewhere
      const double* p = mode_probs.row(n);
      double sum = 0.0;
      std::size_t support = 0;
      for (std::size_t k = 0; k < c; ++k)
        if (p[k] > 0.0) {
          sum += g[k];
          ++support;
        }
      const double mean = sum / static_cast<double>(support);
      for (std::size_t k = 0; k < c; ++k) o[k] = p[k] > 0.0 ? g[k] - mean : 0.0;
    }
  }
}

enum class Regularizer { kl_to_prior, neg_entropy };

OuterResult outer_common(const Classifier& theta, const Hyperplane& w, const BatchRef& batch,
                         double gamma, const std::vector<double>& prior, TargetMode mode,
                         bool kl_sparse_mean, Regularizer reg) {
  const std::size_t c = theta.A.rows;
  const std::size_t d = theta.A.cols;
  const std::size_t b = batch.count;
  if (b == 0) throw DataError("outer objective: empty batch");
  if (batch.dim() != d) throw DataError("outer objective: feature dim mismatch");
  if (reg == Regularizer::kl_to_prior) {
    if (prior.size() != c) throw DataError("outer objective: prior length mismatch");
    for (double q : prior)
      if (!(q > 0.0)) throw DataError("outer objective: prior entries must be strictly positive");
  }

  const Matrix wb_theta = pack_classifier(theta);
  Matrix logits;
  kernels::affine_logits(wb_theta, batch, logits);

  Matrix targets;
  if (mode == TargetMode::softmax)
    kernels::rows_softmax(logits, targets);
  else
    kernels::rows_sparsemax(logits, targets);

  Matrix w_logits;
  kernels::affine_logits(w.W, batch, w_logits);
  Matrix s_probs;
  std::vector<double> loss_n, lse;
  kernels::ce_forward(w_logits, targets, s_probs, loss_n, lse);
  const double ce_term = ordered_mean(loss_n);

  // tau_bar: batch mean of the squashed classifier outputs. Softmax rows by
  // default even in sparsemax mode; sparsemax rows behind the ablation flag.
  Matrix mean_probs;
  if (kl_sparse_mean) {
    if (mode == TargetMode::sparsemax)
      mean_probs = targets;
    else
      kernels::rows_sparsemax(logits, mean_probs);
  } else {
    if (mode == TargetMode::softmax)
      mean_probs = targets;
    else
      kernels::rows_softmax(logits, mean_probs);
  }
  std::vector<double> tau_bar(c, 0.0);
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t k = 0; k < c; ++k) tau_bar[k] += mean_probs(n, k);
  for (double& v : tau_bar) v /= static_cast<double>(b);

  double reg_term;
  std::vector<double> k_up(c);  // d(reg)/d(tau_bar), log arguments clamped
  if (reg == Regularizer::kl_to_prior) {
    reg_term = gamma * kl_div(tau_bar, prior);
    for (std::size_t k = 0; k < c; ++k)
      k_up[k] = gamma * (std::log(std::max(tau_bar[k], kKlLogClamp) / prior[k]) + 1.0);
  } else {
    reg_term = -gamma * entropy(tau_bar);
    for (std::size_t k = 0; k < c; ++k)
      k_up[k] = gamma * (std::log(std::max(tau_bar[k], kKlLogClamp)) + 1.0);
  }

  // CE path upstream on the targets: (1/B)(lse_n - w_logits(n,c))
  Matrix g_ce(b, c);
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t k = 0; k < c; ++k) g_ce(n, k) = inv_b * (lse[n] - w_logits(n, k));
  Matrix up_ce;
  chain_through_mode(mode, logits, targets, g_ce, up_ce);

  // regularizer path: same upstream vector for every sample, scaled by 1/B
  Matrix g_reg(b, c);
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t k = 0; k < c; ++k) g_reg(n, k) = inv_b * k_up[k];
  Matrix up_reg;
  chain_through_mode(kl_sparse_mean ? TargetMode::sparsemax : TargetMode::softmax, logits,
                     mean_probs, g_reg, up_reg);

  Matrix up(b, c);
  for (std::size_t i = 0; i < up.data.size(); ++i) up.data[i] = up_ce.data[i] + up_reg.data[i];

  Matrix grad_wb(c, d + 1);
  kernels::accumulate_grad(up, batch, 1.0, grad_wb);

  OuterResult res;
  res.loss = ce_term + reg_term;
  res.kl_term = reg_term;
  res.grad_a = Matrix(c, d);
  res.grad_b.assign(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t j = 0; j < d; ++j) res.grad_a(k, j) = grad_wb(k, j);
    res.grad_b[k] = grad_wb(k, d);
  }
  return res;
}

}  // namespace

TargetMode parse_target_mode(const std::string& s) {
  if (s == "softmax") return TargetMode::softmax;
  if (s == "sparsemax") return TargetMode::sparsemax;
  throw DataError("unknown target mode: " + s);
}

const char* target_mode_name(TargetMode m) {
  return m == TargetMode::softmax ? "softmax" : "sparsemax";
}

Matrix pack_classifier(const Classifier& theta) {
  const std::size_t c = theta.A.rows;
  const std::size_t d = theta.A.cols;
  if (theta.b.size() != c) throw DataError("classifier bias length mismatch");
  Matrix wb(c, d + 1);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t j = 0; j < d; ++j) wb(k, j) = theta.A(k, j);
    wb(k, d) = theta.b[k];
  }
  return wb;
}

Classifier unpack_classifier(const Matrix& wb) {
  if (wb.cols < 2) throw DataError("packed classifier needs at least one feature column");
  Classifier theta;
  theta.A = Matrix(wb.rows, wb.cols - 1);
  theta.b.assign(wb.rows, 0.0);
  for (std::size_t k = 0; k < wb.rows; ++k) {
    for (std::size_t j = 0; j + 1 < wb.cols; ++j) theta.A(k, j) = wb(k, j);
    theta.b[k] = wb(k, wb.cols - 1);
  }
  return theta;
}

WLossGrad ce_loss_grad_w(const Hyperplane& w, const BatchRef& batch, const Matrix& targets) {
  const std::size_t b = batch.count;
  const std::size_t c = w.W.rows;
  if (b == 0) throw DataError("ce_loss_grad_w: empty batch");
  if (targets.rows != b || targets.cols != c) throw DataError("ce_loss_grad_w: target shape mismatch");

  Matrix logits;
  kernels::affine_logits(w.W, batch, logits);
  Matrix probs;
  std::vector<double> loss_n, lse;
  kernels::ce_forward(logits, targets, probs, loss_n, lse);

  // probs becomes (softmax - targets) in place
  for (std::size_t i = 0; i < probs.data.size(); ++i) probs.data[i] -= targets.data[i];

  WLossGrad out;
  out.loss = ordered_mean(loss_n);
  out.grad = Matrix(c, batch.dim() + 1);
  kernels::accumulate_grad(probs, batch, 1.0 / static_cast<double>(b), out.grad);
  return out;
}

Hyperplane inner_solve(const Hyperplane& w0, const BatchRef& batch, const Matrix& targets,
                       int steps, double eta) {
  if (steps < 0) throw DataError("inner_solve: steps must be nonnegative");
  if (!(eta > 0)) throw DataError("inner_solve: eta must be positive");
  Hyperplane w = w0;
  for (int m = 0; m < steps; ++m) {
    WLossGrad lg = ce_loss_grad_w(w, batch, targets);
    for (std::size_t i = 0; i < w.W.data.size(); ++i) w.W.data[i] -= eta * lg.grad.data[i];
  }
  return w;
}

Matrix target_ce_grad(const Hyperplane& w, const BatchRef& batch) {
  Matrix logits;
  kernels::affine_logits(w.W, batch, logits);
  const std::size_t b = logits.rows;
  const std::size_t c = logits.cols;
  Matrix probs;
  std::vector<double> loss_n, lse;
  Matrix zeros(b, c);
  kernels::ce_forward(logits, zeros, probs, loss_n, lse);
  Matrix out(b, c);
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t k = 0; k < c; ++k) out(n, k) = lse[n] - logits(n, k);
  return out;
}

OuterResult outer_loss_grad_theta(const Classifier& theta, const Hyperplane& w,
                                  const BatchRef& batch, double gamma,
                                  const std::vector<double>& prior, TargetMode mode,
                                  bool kl_sparse_mean) {
  if (gamma < 0) throw DataError("outer objective: gamma must be nonnegative");
  return outer_common(theta, w, batch, gamma, prior, mode, kl_sparse_mean,
                      Regularizer::kl_to_prior);
}

OuterResult entropy_objective_grad_theta(const Classifier& theta, const Hyperplane& w,
                                         const BatchRef& batch, double gamma, TargetMode mode) {
  return outer_common(theta, w, batch, gamma, {}, mode, false, Regularizer::neg_entropy);
}

}  // namespace turtle
