#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "turtle/featureset.hpp"
#include "turtle/objective.hpp"

namespace turtle {

enum class PriorKind { uniform, powerlaw, explicit_vector };

struct PriorSpec {
  PriorKind kind = PriorKind::uniform;
  double alpha = 0.0;                  // powerlaw decay
  std::vector<double> explicit_probs;  // explicit_vector only

  static PriorSpec uniform() { return {}; }
  static PriorSpec powerlaw(double a) { return {PriorKind::powerlaw, a, {}}; }
  static PriorSpec explicit_of(std::vector<double> p) {
    return {PriorKind::explicit_vector, 0.0, std::move(p)};
  }

  // Materialize the length-C probability vector; validates positivity.
  std::vector<double> resolve(std::uint32_t num_classes) const;
};

struct TrainConfig {
  std::size_t iterations = 6000;
  double learning_rate = 1e-3;
  int inner_steps = 10;
  std::size_t batch_size = 0;  // 0 resolves to min(N, 1024)
  double gamma = 0.0;
  PriorSpec prior;
  TargetMode target_mode = TargetMode::softmax;
  bool warm_start = true;
  std::uint64_t seed = 0;
  double init_scale = 0.0;      // 0 resolves to 1/sqrt(d+1)
  bool kl_sparse_mean = false;  // ablation: sparsemax-based tau_bar in the KL term

  void validate() const;
  std::size_t resolved_batch(std::size_t n) const;
  double resolved_init_scale(std::size_t dim) const;
};

struct TrainedModel {
  Classifier theta;
  Hyperplane w_final;
  std::vector<double> loss_trace;  // outer loss per iteration, length T
  std::vector<double> kl_trace;    // gamma-weighted regularizer term per iteration
  TrainConfig config;
};

// Alternating optimization: per iteration draw a seeded mini-batch, freeze
// targets mode(tau_theta(z)), run M hyperplane steps, take one classifier
// step against the frozen hyperplane; warm-start the next inner solve or
// redraw w0 from the same stream.
TrainedModel train(const FeatureSet& fs, std::uint32_t num_classes, const TrainConfig& config);

// Same loop with caller-supplied initial parameters (used by the
// equivariance tests). The batch/redraw stream is identical to train().
TrainedModel train_from(const FeatureSet& fs, std::uint32_t num_classes, const TrainConfig& config,
                        Classifier theta0, Hyperplane w0);

// Rowwise argmax of A z + b, ties to the lowest class index.
std::vector<std::uint32_t> predict(const Classifier& theta, const FeatureSet& fs);

// Mean over all rows of mode(tau_theta(z)).
std::vector<double> label_distribution(const Classifier& theta, const FeatureSet& fs,
                                       TargetMode mode);

// Trace CSV with one line per iteration: iteration,outer_loss,kl_term.
void write_loss_trace_csv(const TrainedModel& model, const std::string& path);

}  // namespace turtle
