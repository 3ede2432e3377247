#pragma once

#include <cstdint>
#include <vector>

#include "turtle/featureset.hpp"
#include "turtle/objective.hpp"

namespace turtle {

struct KMeansResult {
  std::vector<std::uint32_t> labels;
  Matrix centroids;  // C x d
  double inertia = 0.0;
  std::size_t iterations_run = 0;
  std::vector<double> inertia_trace;  // per Lloyd iteration, non-increasing
};

// D^2-weighted seeding followed by Lloyd iterations until the largest
// centroid shift drops below tol. Empty clusters are re-seeded to the point
// farthest from its assigned centroid. Deterministic per seed.
KMeansResult kmeans_pp(const FeatureSet& fs, std::uint32_t num_classes, std::uint64_t seed,
                       std::size_t max_iters = 300, double tol = 1e-6);

// Full-batch multinomial logistic regression on the given row subset,
// sharing the ce_loss_grad_w kernel. Returns the packed C x (d+1) weights
// and the per-epoch loss trace.
std::pair<Matrix, std::vector<double>> logreg_fit(const BatchRef& batch,
                                                  const std::vector<std::uint32_t>& labels,
                                                  std::uint32_t num_classes, std::size_t epochs,
                                                  double eta);

struct ProbeResult {
  Classifier classifier;
  double val_accuracy = 0.0;
};

inline constexpr std::size_t kProbeEpochs = 1000;
inline constexpr double kProbeEta = 0.02;

// Supervised linear probe: seeded train/validation split, logistic
// regression on the train rows, accuracy on the held-out rows.
ProbeResult linear_probe(const FeatureSet& fs, const std::vector<std::uint32_t>& labels,
                         std::uint32_t num_classes, double train_fraction, std::uint64_t seed,
                         std::size_t epochs = kProbeEpochs, double eta = kProbeEta);

}  // namespace turtle
