#include "turtle/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "turtle/simplex.hpp"

namespace turtle::kernels {

void affine_logits(const Matrix& wb, const BatchRef& batch, Matrix& logits) {
  const std::size_t c = wb.rows;
  const std::size_t d = batch.dim();
  if (wb.cols != d + 1) throw DataError("affine_logits: weight shape mismatch");
  const std::size_t b = batch.count;
  logits = Matrix(b, c);

  // transpose the weight block once so the class loop is unit-stride
  Matrix wt(d, c);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t j = 0; j < d; ++j) wt(j, k) = wb(k, j);

#pragma omp parallel for schedule(static) if (b * c * d > 4096)
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(b); ++n) {
    const float* z = batch.row(n);
    double* out = logits.row(n);
    for (std::size_t k = 0; k < c; ++k) out[k] = wb(k, d);  // bias first
    for (std::size_t j = 0; j < d; ++j) {
      const double zj = z[j];
      const double* wrow = wt.row(j);
      for (std::size_t k = 0; k < c; ++k) out[k] += zj * wrow[k];
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

#pragma omp parallel for schedule(static) if (b * c > 2048)
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(b); ++n) {
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
  const std::size_t c = logits.cols;
  probs = Matrix(b, c);
#pragma omp parallel for schedule(static) if (b * c > 2048)
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(b); ++n) {
    const double* l = logits.row(n);
    double* p = probs.row(n);
    double mx = l[0];
    for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, l[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      p[k] = std::exp(l[k] - mx);
      sum += p[k];
    }
    for (std::size_t k = 0; k < c; ++k) p[k] /= sum;
  }
}

void rows_sparsemax(const Matrix& logits, Matrix& probs) {
  const std::size_t b = logits.rows;
  const std::size_t c = logits.cols;
  probs = Matrix(b, c);
#pragma omp parallel for schedule(static) if (b * c > 2048)
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(b); ++n) {
    const double* l = logits.row(n);
    double* p = probs.row(n);
    std::vector<double> sorted(l, l + c);
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double cumsum = 0.0, support_sum = 0.0;
    std::size_t k = 0;
    for (std::size_t j = 0; j < c; ++j) {
      cumsum += sorted[j];
      if (1.0 + static_cast<double>(j + 1) * sorted[j] > cumsum) {
        k = j + 1;
        support_sum = cumsum;
      }
    }
    const double t = (support_sum - 1.0) / static_cast<double>(k);
    for (std::size_t j = 0; j < c; ++j) p[j] = std::max(l[j] - t, 0.0);
  }
}

void accumulate_grad(const Matrix& up, const BatchRef& batch, double scale, Matrix& grad) {
  const std::size_t b = batch.count;
  const std::size_t c = up.cols;
  const std::size_t d = batch.dim();
  if (up.rows != b) throw DataError("accumulate_grad: row mismatch");
  if (grad.rows != c || grad.cols != d + 1) throw DataError("accumulate_grad: grad shape mismatch");

#pragma omp parallel for schedule(static) if (b * c * d > 4096)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(c); ++k) {
    double* g = grad.row(k);
    for (std::size_t n = 0; n < b; ++n) {
      const double coef = scale * up(n, k);
      const float* z = batch.row(n);
      for (std::size_t j = 0; j < d; ++j) g[j] += coef * z[j];
      g[d] += coef;
    }
  }
}

void argmax_rows(const Matrix& logits, std::vector<std::uint32_t>& labels) {
  const std::size_t b = logits.rows;
  const std::size_t c = logits.cols;
  labels.assign(b, 0);
#pragma omp parallel for schedule(static) if (b * c > 4096)
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(b); ++n) {
    const double* l = logits.row(n);
    std::size_t best = 0;
    for (std::size_t k = 1; k < c; ++k)
      if (l[k] > l[best]) best = k;
    labels[n] = static_cast<std::uint32_t>(best);
  }
}

void assign_nearest(const BatchRef& batch, const Matrix& centroids,
                    std::vector<std::uint32_t>& labels, std::vector<double>& dist2) {
  const std::size_t b = batch.count;
  const std::size_t c = centroids.rows;
  const std::size_t d = batch.dim();
  if (centroids.cols != d) throw DataError("assign_nearest: centroid dim mismatch");
  labels.assign(b, 0);
  dist2.assign(b, 0.0);
#pragma omp parallel for schedule(static) if (b * c * d > 4096)
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(b); ++n) {
    const float* z = batch.row(n);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c; ++k) {
      const double* cen = centroids.row(k);
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = z[j] - cen[j];
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

}  // namespace turtle::kernels
