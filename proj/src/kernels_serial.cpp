#include <algorithm>
#include <cmath>

#include "turtle/kernels.hpp"
#include "turtle/simplex.hpp"

// Straight-line reference versions of the OpenMP kernels. The accumulation
// order matches the parallel versions cell by cell, so the equivalence
// tests can require exact equality.

namespace turtle::serial {

void affine_logits(const Matrix& wb, const BatchRef& batch, Matrix& logits) {
  const std::size_t c = wb.rows;
  const std::size_t d = batch.dim();
  if (wb.cols != d + 1) throw DataError("affine_logits: weight shape mismatch");
  logits = Matrix(batch.count, c);
  for (std::size_t n = 0; n < batch.count; ++n) {
    const float* z = batch.row(n);
    for (std::size_t k = 0; k < c; ++k) {
      double acc = wb(k, d);
      for (std::size_t j = 0; j < d; ++j) acc += static_cast<double>(z[j]) * wb(k, j);
      logits(n, k) = acc;
    }
  }
}

void ce_forward(const Matrix& logits, const Matrix& targets, Matrix& probs,
                std::vector<double>& loss, std::vector<double>& lse) {
  if (!logits.same_shape(targets)) throw DataError("ce_forward: shape mismatch");
  const std::size_t b = logits.rows;
  const std::size_t c = logits.cols;
  probs = Matrix(b, c);
  loss.assign(b, 0.0);
  lse.assign(b, 0.0);
  for (std::size_t n = 0; n < b; ++n) {
    const double* l = logits.row(n);
    const double* t = targets.row(n);
    double* p = probs.row(n);
    double mx = l[0];
    for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, l[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      p[k] = std::exp(l[k] - mx);
      sum += p[k];
    }
    const double row_lse = mx + std::log(sum);
    double row_loss = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      p[k] /= sum;
      row_loss += t[k] * (row_lse - l[k]);
    }
    loss[n] = row_loss;
    lse[n] = row_lse;
  }
}

void rows_softmax(const Matrix& logits, Matrix& probs) {
  const std::size_t b = logits.rows;
  probs = Matrix(b, logits.cols);
  for (std::size_t n = 0; n < b; ++n) {
    std::vector<double> row(logits.row(n), logits.row(n) + logits.cols);
    std::vector<double> p = softmax(row);
    std::copy(p.begin(), p.end(), probs.row(n));
  }
}

void rows_sparsemax(const Matrix& logits, Matrix& probs) {
  const std::size_t b = logits.rows;
  probs = Matrix(b, logits.cols);
  for (std::size_t n = 0; n < b; ++n) {
    std::vector<double> row(logits.row(n), logits.row(n) + logits.cols);
    std::vector<double> p = sparsemax(row);
    std::copy(p.begin(), p.end(), probs.row(n));
  }
}

void accumulate_grad(const Matrix& up, const BatchRef& batch, double scale, Matrix& grad) {
  const std::size_t b = batch.count;
  const std::size_t c = up.cols;
  const std::size_t d = batch.dim();
  if (up.rows != b) throw DataError("accumulate_grad: row mismatch");
  if (grad.rows != c || grad.cols != d + 1) throw DataError("accumulate_grad: grad shape mismatch");
  for (std::size_t k = 0; k < c; ++k) {
    double* g = grad.row(k);
    for (std::size_t n = 0; n < b; ++n) {
      const double coef = scale * up(n, k);
      const float* z = batch.row(n);
      for (std::size_t j = 0; j < d; ++j) g[j] += coef * static_cast<double>(z[j]);
      g[d] += coef;
    }
  }
}

void argmax_rows(const Matrix& logits, std::vector<std::uint32_t>& labels) {
  labels.assign(logits.rows, 0);
  for (std::size_t n = 0; n < logits.rows; ++n) {
    const double* l = logits.row(n);
    std::size_t best = 0;
    for (std::size_t k = 1; k < logits.cols; ++k)
      if (l[k] > l[best]) best = k;
    labels[n] = static_cast<std::uint32_t>(best);
  }
}

void assign_nearest(const BatchRef& batch, const Matrix& centroids,
                    std::vector<std::uint32_t>& labels, std::vector<double>& dist2) {
  const std::size_t d = batch.dim();
  if (centroids.cols != d) throw DataError("assign_nearest: centroid dim mismatch");
  labels.assign(batch.count, 0);
  dist2.assign(batch.count, 0.0);
  for (std::size_t n = 0; n < batch.count; ++n) {
    const float* z = batch.row(n);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centroids.rows; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = static_cast<double>(z[j]) - centroids(k, j);
        s += diff * diff;
      }
      if (s < best_d) {
        best_d = s;
        best = k;
      }
    }
    labels[n] = static_cast<std::uint32_t>(best);
    dist2[n] = best_d;
  }
}

}  // namespace turtle::serial
