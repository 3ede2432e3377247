#include "turtle/modelselect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "turtle/baselines.hpp"

namespace turtle {

std::vector<std::vector<std::uint32_t>> kfold_indices(std::size_t n, std::size_t folds,
                                                      std::uint64_t seed) {
  if (folds < 2) throw DataError("kfold_indices: folds must be >= 2");
  if (n < folds) throw DataError("kfold_indices: need at least one sample per fold");
  Rng rng(seed);
  std::vector<std::uint32_t> order = rng.sample_without_replacement(
      static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n));
  std::vector<std::vector<std::uint32_t>> out(folds);
  const std::size_t base = n / folds;
  const std::size_t extra = n % folds;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    out[f].assign(order.begin() + pos, order.begin() + pos + len);
    pos += len;
  }
  return out;
}

std::pair<double, double> cv_generalization_error(const FeatureSet& fs,
                                                  const std::vector<std::uint32_t>& est_labels,
                                                  std::uint32_t c, std::size_t folds,
                                                  std::uint64_t seed, std::size_t epochs,
                                                  double eta) {
  fs.validate();
  if (est_labels.size() != fs.n) throw DataError("cv_generalization_error: label length mismatch");
  for (std::uint32_t l : est_labels)
    if (l >= c) throw DataError("cv_generalization_error: label out of range");

  std::set<std::uint32_t> distinct(est_labels.begin(), est_labels.end());
  if (distinct.size() < 2)
    return {1.0 - 1.0 / static_cast<double>(c), 0.0};  // degenerate labeling penalty

  auto fold_sets = kfold_indices(fs.n, folds, seed);
  std::vector<double> errors;
  errors.reserve(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::uint32_t> train_idx;
    train_idx.reserve(fs.n - fold_sets[f].size());
    for (std::size_t g = 0; g < folds; ++g)
      if (g != f) train_idx.insert(train_idx.end(), fold_sets[g].begin(), fold_sets[g].end());
    std::vector<std::uint32_t> train_labels(train_idx.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i)
      train_labels[i] = est_labels[train_idx[i]];

    auto [wb, trace] = logreg_fit(BatchRef::of(fs, train_idx), train_labels, c, epochs, eta);

    Matrix logits;
    kernels::affine_logits(wb, BatchRef::of(fs, fold_sets[f]), logits);
    std::vector<std::uint32_t> pred;
    kernels::argmax_rows(logits, pred);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < fold_sets[f].size(); ++i)
      if (pred[i] == est_labels[fold_sets[f][i]]) ++hits;
    errors.push_back(1.0 - static_cast<double>(hits) / static_cast<double>(fold_sets[f].size()));
  }
  return mean_stddev(errors);
}

GridResult grid_search(const FeatureSet& fs, std::uint32_t c,
                       const std::vector<double>& gamma_grid,
                       const std::vector<double>& alpha_grid, const TrainConfig& base_config,
                       std::size_t folds, std::uint64_t seed) {
  if (gamma_grid.empty() || alpha_grid.empty()) throw DataError("grid_search: empty grid");

  GridResult grid;
  grid.table.resize(gamma_grid.size() * alpha_grid.size());

  const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(grid.table.size());
#pragma omp parallel for schedule(dynamic) if (total > 1)
  for (std::ptrdiff_t cell = 0; cell < total; ++cell) {
    const std::size_t gi = static_cast<std::size_t>(cell) / alpha_grid.size();
    const std::size_t ai = static_cast<std::size_t>(cell) % alpha_grid.size();
    GridCell& out = grid.table[cell];
    out.gamma = gamma_grid[gi];
    out.alpha = alpha_grid[ai];
    try {
      TrainConfig cfg = base_config;
      cfg.gamma = out.gamma;
      cfg.prior = PriorSpec::powerlaw(out.alpha);
      cfg.seed = derive_seed(seed, gi + 1, ai + 1);
      TrainedModel model = train(fs, c, cfg);
      std::vector<std::uint32_t> labels = predict(model.theta, fs);
      auto [mean_err, std_err] =
          cv_generalization_error(fs, labels, c, folds, derive_seed(cfg.seed, 0xCF));
      out.mean_val_error = mean_err;
      out.std_val_error = std_err;
      out.ok = true;
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
  }

  bool found = false;
  for (std::size_t i = 0; i < grid.table.size(); ++i) {
    const GridCell& cand = grid.table[i];
    if (!cand.ok) continue;
    if (!found) {
      grid.best_index = i;
      found = true;
      continue;
    }
    const GridCell& best = grid.table[grid.best_index];
    if (cand.mean_val_error < best.mean_val_error ||
        (cand.mean_val_error == best.mean_val_error &&
         (cand.gamma < best.gamma ||
          (cand.gamma == best.gamma && cand.alpha < best.alpha))))
      grid.best_index = i;
  }
  if (!found) throw DataError("grid_search: every cell failed");
  return grid;
}

void write_grid_csv(const GridResult& grid, const std::string& path) {
  namespace fsys = std::filesystem;
  fsys::path target(path);
  fsys::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw DataError("cannot open output file: " + tmp.string());
    os << "gamma,alpha,mean_val_error,std_val_error,ok\n";
    char buf[160];
    for (const GridCell& cell : grid.table) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%d\n", cell.gamma, cell.alpha,
                    cell.mean_val_error, cell.std_val_error, cell.ok ? 1 : 0);
      os << buf;
    }
    if (!os) throw DataError("write failure: " + tmp.string());
  }
  fsys::rename(tmp, target);
}

}  // namespace turtle
