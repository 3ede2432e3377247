#include "turtle/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace turtle {

void validate_simplex(const std::vector<double>& p, double tol) {
  if (p.empty()) throw DataError("simplex vector must be non-empty");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw DataError("simplex vector has a negative or NaN entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > tol)
    throw DataError("simplex vector sums to " + std::to_string(sum) + ", expected 1");
}

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw DataError("softmax: empty input");
  double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> sparsemax(const std::vector<double>& logits) {
  if (logits.empty()) throw DataError("sparsemax: empty input");
  std::vector<double> sorted = logits;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());

  double cumsum = 0.0;
  double support_sum = 0.0;
  std::size_t k = 0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumsum += sorted[j];
    if (1.0 + static_cast<double>(j + 1) * sorted[j] > cumsum) {
      k = j + 1;
      support_sum = cumsum;
    }
  }
  double t = (support_sum - 1.0) / static_cast<double>(k);

  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::max(logits[i] - t, 0.0);
  return out;
}

std::vector<double> sparsemax_vjp(const std::vector<double>& logits, const std::vector<double>& upstream) {
  if (logits.size() != upstream.size()) throw DataError("sparsemax_vjp: size mismatch");
  std::vector<double> p = sparsemax(logits);
  double sum = 0.0;
  std::size_t support = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) {
      sum += upstream[i];
      ++support;
    }
  double mean = sum / static_cast<double>(support);
  std::vector<double> out(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) out[i] = upstream[i] - mean;
  return out;
}

double entropy(const std::vector<double>& p) {
  validate_simplex(p);
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double kl_div(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw DataError("kl_div: size mismatch");
  validate_simplex(p);
  validate_simplex(q);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] <= 0.0) throw DataError("kl_div: q has a zero entry where p > 0");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

std::vector<double> powerlaw_pmf(std::uint32_t num_classes, double alpha) {
  if (num_classes == 0) throw DataError("powerlaw_pmf: num_classes must be positive");
  if (alpha < 0) throw DataError("powerlaw_pmf: alpha must be nonnegative");
  std::vector<double> p(num_classes);
  double sum = 0.0;
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    p[c] = std::pow(static_cast<double>(c + 1), -alpha);
    sum += p[c];
  }
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace turtle
