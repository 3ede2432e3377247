#include "turtle/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "turtle/simplex.hpp"

namespace turtle {

std::vector<double> PriorSpec::resolve(std::uint32_t num_classes) const {
  if (num_classes == 0) throw DataError("prior: num_classes must be positive");
  switch (kind) {
    case PriorKind::uniform:
      return std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes));
    case PriorKind::powerlaw:
      return powerlaw_pmf(num_classes, alpha);
    case PriorKind::explicit_vector: {
      if (explicit_probs.size() != num_classes)
        throw DataError("explicit prior length does not match num_classes");
      for (double v : explicit_probs)
        if (!(v > 0.0)) throw DataError("explicit prior must be strictly positive");
      validate_simplex(explicit_probs);
      return explicit_probs;
    }
  }
  throw DataError("prior: unknown kind");
}

void TrainConfig::validate() const {
  if (iterations < 1) throw DataError("TrainConfig: iterations must be >= 1");
  if (!(learning_rate > 0)) throw DataError("TrainConfig: learning_rate must be positive");
  if (inner_steps < 0) throw DataError("TrainConfig: inner_steps must be >= 0");
  if (gamma < 0) throw DataError("TrainConfig: gamma must be nonnegative");
  if (init_scale < 0) throw DataError("TrainConfig: init_scale must be nonnegative");
}

std::size_t TrainConfig::resolved_batch(std::size_t n) const {
  std::size_t b = batch_size == 0 ? std::min<std::size_t>(n, 1024) : batch_size;
  if (b < 1) throw DataError("TrainConfig: batch_size must be >= 1");
  return std::min(b, n);
}

double TrainConfig::resolved_init_scale(std::size_t dim) const {
  return init_scale > 0 ? init_scale : 1.0 / std::sqrt(static_cast<double>(dim + 1));
}

namespace {

void fill_gaussian(Matrix& m, Rng& rng, double scale) {
  for (double& v : m.data) v = scale * rng.normal();
}

TrainedModel run_loop(const FeatureSet& fs, std::uint32_t c, const TrainConfig& cfg,
                      Classifier theta, Hyperplane w) {
  const std::size_t n = fs.n;
  const std::size_t b = cfg.resolved_batch(n);
  const double scale = cfg.resolved_init_scale(fs.dim);
  const std::vector<double> prior = cfg.prior.resolve(c);

  // Draw order per iteration is fixed: batch indices first, then the cold
  // w0 redraw when warm start is off.
  Rng rng(derive_seed(cfg.seed, 2));

  TrainedModel model;
  model.config = cfg;
  model.loss_trace.reserve(cfg.iterations);
  model.kl_trace.reserve(cfg.iterations);

  std::vector<std::uint32_t> all_rows;
  if (b == n) {
    all_rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) all_rows[i] = static_cast<std::uint32_t>(i);
  }

  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    std::vector<std::uint32_t> batch_idx =
        (b == n) ? all_rows
                 : rng.sample_without_replacement(static_cast<std::uint32_t>(n),
                                                  static_cast<std::uint32_t>(b));
    BatchRef batch = BatchRef::of(fs, batch_idx);

    if (!cfg.warm_start && t > 0) fill_gaussian(w.W, rng, scale);

    // freeze targets at the current classifier
    Matrix logits;
    kernels::affine_logits(pack_classifier(theta), batch, logits);
    Matrix targets;
    if (cfg.target_mode == TargetMode::softmax)
      kernels::rows_softmax(logits, targets);
    else
      kernels::rows_sparsemax(logits, targets);

    w = inner_solve(w, batch, targets, cfg.inner_steps, cfg.learning_rate);

    OuterResult outer = outer_loss_grad_theta(theta, w, batch, cfg.gamma, prior,
                                              cfg.target_mode, cfg.kl_sparse_mean);
    model.loss_trace.push_back(outer.loss);
    model.kl_trace.push_back(outer.kl_term);

    for (std::size_t i = 0; i < theta.A.data.size(); ++i)
      theta.A.data[i] -= cfg.learning_rate * outer.grad_a.data[i];
    for (std::size_t k = 0; k < c; ++k) theta.b[k] -= cfg.learning_rate * outer.grad_b[k];
  }

  model.theta = std::move(theta);
  model.w_final = std::move(w);
  return model;
}

}  // namespace

TrainedModel train(const FeatureSet& fs, std::uint32_t c, const TrainConfig& cfg) {
  fs.validate();
  cfg.validate();
  if (c < 1) throw DataError("train: num_classes must be >= 1");
  if (fs.n < c) throw DataError("train: need at least num_classes samples");

  const double scale = cfg.resolved_init_scale(fs.dim);
  Rng init_rng(derive_seed(cfg.seed, 1));
  Classifier theta;
  theta.A = Matrix(c, fs.dim);
  fill_gaussian(theta.A, init_rng, scale);
  theta.b.assign(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) theta.b[k] = scale * init_rng.normal();
  Hyperplane w;
  w.W = Matrix(c, fs.dim + 1);
  fill_gaussian(w.W, init_rng, scale);

  return run_loop(fs, c, cfg, std::move(theta), std::move(w));
}

TrainedModel train_from(const FeatureSet& fs, std::uint32_t c, const TrainConfig& cfg,
                        Classifier theta0, Hyperplane w0) {
  fs.validate();
  cfg.validate();
  if (fs.n < c) throw DataError("train: need at least num_classes samples");
  if (theta0.A.rows != c || theta0.A.cols != fs.dim || theta0.b.size() != c)
    throw DataError("train_from: classifier shape mismatch");
  if (w0.W.rows != c || w0.W.cols != fs.dim + 1)
    throw DataError("train_from: hyperplane shape mismatch");
  return run_loop(fs, c, cfg, std::move(theta0), std::move(w0));
}

std::vector<std::uint32_t> predict(const Classifier& theta, const FeatureSet& fs) {
  if (theta.A.cols != fs.dim) throw DataError("predict: feature dim mismatch");
  const Matrix wb = pack_classifier(theta);
  std::vector<std::uint32_t> labels(fs.n);
  const std::size_t chunk = 8192;
  for (std::size_t start = 0; start < fs.n; start += chunk) {
    const std::size_t count = std::min(chunk, fs.n - start);
    std::vector<std::uint32_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = static_cast<std::uint32_t>(start + i);
    BatchRef window = BatchRef::of(fs, idx);
    Matrix logits;
    kernels::affine_logits(wb, window, logits);
    std::vector<std::uint32_t> part;
    kernels::argmax_rows(logits, part);
    for (std::size_t i = 0; i < count; ++i) labels[start + i] = part[i];
  }
  return labels;
}

std::vector<double> label_distribution(const Classifier& theta, const FeatureSet& fs,
                                       TargetMode mode) {
  if (theta.A.cols != fs.dim) throw DataError("label_distribution: feature dim mismatch");
  const Matrix wb = pack_classifier(theta);
  const std::size_t c = theta.A.rows;
  std::vector<double> acc(c, 0.0);
  const std::size_t chunk = 8192;
  for (std::size_t start = 0; start < fs.n; start += chunk) {
    const std::size_t count = std::min(chunk, fs.n - start);
    std::vector<std::uint32_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = static_cast<std::uint32_t>(start + i);
    BatchRef window = BatchRef::of(fs, idx);
    Matrix logits, probs;
    kernels::affine_logits(wb, window, logits);
    if (mode == TargetMode::softmax)
      kernels::rows_softmax(logits, probs);
    else
      kernels::rows_sparsemax(logits, probs);
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t k = 0; k < c; ++k) acc[k] += probs(i, k);
  }
  for (double& v : acc) v /= static_cast<double>(fs.n);
  return acc;
}

void write_loss_trace_csv(const TrainedModel& model, const std::string& path) {
  namespace fsys = std::filesystem;
  fsys::path target(path);
  fsys::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw DataError("cannot open output file: " + tmp.string());
    os << "iteration,outer_loss,kl_term\n";
    char buf[80];
    for (std::size_t t = 0; t < model.loss_trace.size(); ++t) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", t, model.loss_trace[t],
                    model.kl_trace[t]);
      os << buf;
    }
    if (!os) throw DataError("write failure: " + tmp.string());
  }
  fsys::rename(tmp, target);
}

}  // namespace turtle
