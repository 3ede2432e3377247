#pragma once

#include <cstdint>
#include <vector>

#include "turtle/common.hpp"
#include "turtle/featureset.hpp"

namespace turtle {

// View over a subset of FeatureSet rows. idx == nullptr means rows 0..count-1.
struct BatchRef {
  const FeatureSet* fs = nullptr;
  const std::uint32_t* idx = nullptr;
  std::size_t count = 0;

  const float* row(std::size_t i) const { return fs->row(idx ? idx[i] : i); }
  std::size_t dim() const { return fs->dim; }

  static BatchRef all(const FeatureSet& f) { return {&f, nullptr, f.n}; }
  static BatchRef of(const FeatureSet& f, const std::vector<std::uint32_t>& rows) {
    return {&f, rows.data(), rows.size()};
  }
};

// Data-parallel kernels. Every kernel accumulates floating-point sums in a
// fixed order (per output cell, samples ascending), so results are
// bit-identical across thread counts and to the serial reference below.
namespace kernels {

// logits(n,c) = wb(c,d) + sum_j wb(c,j) * batch.row(n)[j]
// wb is C x (d+1); the last column is the bias on the augmented [z;1].
void affine_logits(const Matrix& wb, const BatchRef& batch, Matrix& logits);

// probs = rowwise softmax(logits); loss[n] = sum_c targets(n,c)*(lse_n - logits(n,c));
// lse[n] = log-sum-exp of row n.
void ce_forward(const Matrix& logits, const Matrix& targets, Matrix& probs,
                std::vector<double>& loss, std::vector<double>& lse);

void rows_softmax(const Matrix& logits, Matrix& probs);
void rows_sparsemax(const Matrix& logits, Matrix& probs);

// grad(c,j) += scale * sum_n up(n,c) * z~(n,j), z~ = [z;1]; grad is C x (d+1).
void accumulate_grad(const Matrix& up, const BatchRef& batch, double scale, Matrix& grad);

// labels[n] = argmax_c logits(n,c), ties to the lowest index
void argmax_rows(const Matrix& logits, std::vector<std::uint32_t>& labels);

// labels[n] = nearest centroid (squared Euclidean, ties to lower index),
// dist2[n] = distance to it
void assign_nearest(const BatchRef& batch, const Matrix& centroids,
                    std::vector<std::uint32_t>& labels, std::vector<double>& dist2);

}  // namespace kernels

// Plain-loop reference implementations, kept for the kernel equivalence
// tests and the benchmark. Same contracts as turtle::kernels.
namespace serial {

void affine_logits(const Matrix& wb, const BatchRef& batch, Matrix& logits);
void ce_forward(const Matrix& logits, const Matrix& targets, Matrix& probs,
                std::vector<double>& loss, std::vector<double>& lse);
void rows_softmax(const Matrix& logits, Matrix& probs);
void rows_sparsemax(const Matrix& logits, Matrix& probs);
void accumulate_grad(const Matrix& up, const BatchRef& batch, double scale, Matrix& grad);
void argmax_rows(const Matrix& logits, std::vector<std::uint32_t>& labels);
void assign_nearest(const BatchRef& batch, const Matrix& centroids,
                    std::vector<std::uint32_t>& labels, std::vector<double>& dist2);

}  // namespace serial

}  // namespace turtle
