#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "turtle/featureset.hpp"
#include "turtle/trainer.hpp"

namespace turtle {

// Training budget of the fold classifier. The selection signal only needs
// relative errors across labelings, so a moderate budget suffices.
inline constexpr std::size_t kCvEpochs = 600;
inline constexpr double kCvEta = 0.02;

// Seeded shuffle split into `folds` disjoint chunks covering 0..n-1.
std::vector<std::vector<std::uint32_t>> kfold_indices(std::size_t n, std::size_t folds,
                                                      std::uint64_t seed);

// Generalization error of a linear classifier trained on the estimated
// labels themselves; no ground truth involved. Labelings with fewer than
// two distinct labels score the documented maximal error 1 - 1/C.
std::pair<double, double> cv_generalization_error(const FeatureSet& fs,
                                                  const std::vector<std::uint32_t>& est_labels,
                                                  std::uint32_t num_classes, std::size_t folds,
                                                  std::uint64_t seed,
                                                  std::size_t epochs = kCvEpochs,
                                                  double eta = kCvEta);

struct GridCell {
  double gamma = 0.0;
  double alpha = 0.0;
  double mean_val_error = 0.0;
  double std_val_error = 0.0;
  bool ok = false;
  std::string error;  // failure diagnostic when !ok
};

struct GridResult {
  std::vector<GridCell> table;  // gamma-major order
  std::size_t best_index = 0;

  const GridCell& best() const { return table[best_index]; }
};

// For each (gamma, alpha): train with a power-law prior, predict labels,
// score them with cv_generalization_error. Cells run on decorrelated
// sub-seeds; failures are recorded and skipped for best-selection. Ties
// break toward smaller gamma, then smaller alpha.
GridResult grid_search(const FeatureSet& fs, std::uint32_t num_classes,
                       const std::vector<double>& gamma_grid,
                       const std::vector<double>& alpha_grid, const TrainConfig& base_config,
                       std::size_t folds, std::uint64_t seed);

void write_grid_csv(const GridResult& grid, const std::string& path);

}  // namespace turtle
