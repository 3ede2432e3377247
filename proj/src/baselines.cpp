#include "turtle/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace turtle {

namespace {

double ordered_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// D^2 sampling: one uniform draw walks the prefix sums of the current
// squared distances. All-zero weights fall back to a uniform pick.
std::size_t weighted_pick(const std::vector<double>& weights, Rng& rng) {
  double total = ordered_sum(weights);
  if (!(total > 0.0)) return static_cast<std::size_t>(rng.below(weights.size()));
  double r = rng.uniform() * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cum += weights[i];
    if (r < cum) return i;
  }
  return weights.size() - 1;
}

}  // namespace

KMeansResult kmeans_pp(const FeatureSet& fs, std::uint32_t c, std::uint64_t seed,
                       std::size_t max_iters, double tol) {
  fs.validate();
  if (c == 0) throw DataError("kmeans_pp: num_classes must be positive");
  if (fs.n < c) throw DataError("kmeans_pp: need at least num_classes samples");
  const std::size_t n = fs.n;
  const std::size_t d = fs.dim;
  Rng rng(seed);
  BatchRef all = BatchRef::all(fs);

  Matrix centroids(c, d);
  auto set_centroid = [&](std::size_t k, std::size_t point) {
    const float* z = fs.row(point);
    for (std::size_t j = 0; j < d; ++j) centroids(k, j) = z[j];
  };

  set_centroid(0, rng.below(n));
  std::vector<double> min_d2(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const float* z = fs.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = static_cast<double>(z[j]) - centroids(0, j);
      s += diff * diff;
    }
    min_d2[i] = s;
  }
  for (std::uint32_t k = 1; k < c; ++k) {
    set_centroid(k, weighted_pick(min_d2, rng));
    for (std::size_t i = 0; i < n; ++i) {
      const float* z = fs.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = static_cast<double>(z[j]) - centroids(k, j);
        s += diff * diff;
      }
      min_d2[i] = std::min(min_d2[i], s);
    }
  }

  KMeansResult res;
  std::vector<double> dist2;
  for (std::size_t it = 0; it < max_iters; ++it) {
    kernels::assign_nearest(all, centroids, res.labels, dist2);

    std::vector<std::size_t> counts(c, 0);
    for (std::uint32_t l : res.labels) ++counts[l];

    // hand empty clusters the farthest point of a non-singleton cluster
    for (std::uint32_t k = 0; k < c; ++k) {
      if (counts[k] > 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[res.labels[i]] <= 1) continue;
        if (far == n || dist2[i] > dist2[far]) far = i;
      }
      if (far == n) continue;
      --counts[res.labels[far]];
      res.labels[far] = k;
      counts[k] = 1;
      set_centroid(k, far);
      dist2[far] = 0.0;
    }

    res.inertia = ordered_sum(dist2);
    res.inertia_trace.push_back(res.inertia);
    res.iterations_run = it + 1;

    Matrix sums(c, d);
    for (std::size_t i = 0; i < n; ++i) {
      const float* z = fs.row(i);
      double* srow = sums.row(res.labels[i]);
      for (std::size_t j = 0; j < d; ++j) srow[j] += z[j];
    }
    double max_shift = 0.0;
    for (std::uint32_t k = 0; k < c; ++k) {
      if (counts[k] == 0) continue;
      double shift2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double nc = sums(k, j) / static_cast<double>(counts[k]);
        const double delta = nc - centroids(k, j);
        shift2 += delta * delta;
        centroids(k, j) = nc;
      }
      max_shift = std::max(max_shift, std::sqrt(shift2));
    }
    if (max_shift < tol) break;
  }

  // final assignment against the settled centroids
  kernels::assign_nearest(all, centroids, res.labels, dist2);
  res.inertia = ordered_sum(dist2);
  res.centroids = std::move(centroids);
  return res;
}

std::pair<Matrix, std::vector<double>> logreg_fit(const BatchRef& batch,
                                                  const std::vector<std::uint32_t>& labels,
                                                  std::uint32_t c, std::size_t epochs,
                                                  double eta) {
  if (labels.size() != batch.count) throw DataError("logreg_fit: label count mismatch");
  for (std::uint32_t l : labels)
    if (l >= c) throw DataError("logreg_fit: label out of range");
  Matrix targets(batch.count, c);
  for (std::size_t i = 0; i < batch.count; ++i) targets(i, labels[i]) = 1.0;

  Hyperplane w;
  w.W = Matrix(c, batch.dim() + 1);
  std::vector<double> trace;
  trace.reserve(epochs);
  for (std::size_t e = 0; e < epochs; ++e) {
    WLossGrad lg = ce_loss_grad_w(w, batch, targets);
    trace.push_back(lg.loss);
    for (std::size_t i = 0; i < w.W.data.size(); ++i) w.W.data[i] -= eta * lg.grad.data[i];
  }
  return {std::move(w.W), std::move(trace)};
}

ProbeResult linear_probe(const FeatureSet& fs, const std::vector<std::uint32_t>& labels,
                         std::uint32_t c, double train_fraction, std::uint64_t seed,
                         std::size_t epochs, double eta) {
  fs.validate();
  if (labels.size() != fs.n) throw DataError("linear_probe: needs one label per sample");
  if (!(train_fraction > 0.0) || train_fraction >= 1.0)
    throw DataError("linear_probe: train_fraction must be in (0, 1)");

  Rng rng(seed);
  std::vector<std::uint32_t> order =
      rng.sample_without_replacement(static_cast<std::uint32_t>(fs.n),
                                     static_cast<std::uint32_t>(fs.n));
  const std::size_t n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(fs.n)));
  if (n_train == 0) throw DataError("linear_probe: empty train split");
  if (n_train == fs.n) throw DataError("linear_probe: empty validation split");

  std::vector<std::uint32_t> train_idx(order.begin(), order.begin() + n_train);
  std::vector<std::uint32_t> val_idx(order.begin() + n_train, order.end());
  std::vector<std::uint32_t> train_labels(n_train);
  for (std::size_t i = 0; i < n_train; ++i) train_labels[i] = labels[train_idx[i]];

  auto [wb, trace] = logreg_fit(BatchRef::of(fs, train_idx), train_labels, c, epochs, eta);

  Matrix logits;
  kernels::affine_logits(wb, BatchRef::of(fs, val_idx), logits);
  std::vector<std::uint32_t> pred;
  kernels::argmax_rows(logits, pred);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < val_idx.size(); ++i)
    if (pred[i] == labels[val_idx[i]]) ++hits;

  ProbeResult out;
  out.classifier = unpack_classifier(wb);
  out.val_accuracy = static_cast<double>(hits) / static_cast<double>(val_idx.size());
  return out;
}

}  // namespace turtle
