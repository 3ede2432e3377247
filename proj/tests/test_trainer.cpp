#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "turtle/assignment.hpp"
#include "turtle/simplex.hpp"
#include "turtle/trainer.hpp"

using namespace turtle;

namespace {

FeatureSet four_blobs(std::uint64_t seed, double separation = 10.0) {
  BlobSpec spec;
  spec.num_classes = 4;
  spec.dim = 16;
  spec.class_sizes.assign(4, 100);
  spec.separation = separation;
  spec.seed = seed;
  return gen_gaussian_blobs(spec);
}

TrainConfig quick_config(std::uint64_t seed, std::size_t iters = 400) {
  TrainConfig cfg;
  cfg.iterations = iters;
  cfg.gamma = 10.0;
  cfg.prior = PriorSpec::uniform();
  cfg.target_mode = TargetMode::sparsemax;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("training is deterministic per seed") {
  FeatureSet fs = four_blobs(1);
  TrainConfig cfg = quick_config(7, 60);
  TrainedModel a = train(fs, 4, cfg);
  TrainedModel b = train(fs, 4, cfg);
  CHECK(a.loss_trace == b.loss_trace);
  CHECK(a.kl_trace == b.kl_trace);
  CHECK(a.theta.A.data == b.theta.A.data);
  CHECK(a.w_final.W.data == b.w_final.W.data);
  CHECK(predict(a.theta, fs) == predict(b.theta, fs));

  TrainConfig other = cfg;
  other.seed = 8;
  TrainedModel c = train(fs, 4, other);
  CHECK(a.loss_trace != c.loss_trace);
}

TEST_CASE("cold start is deterministic too and differs from warm start") {
  FeatureSet fs = four_blobs(2);
  TrainConfig cfg = quick_config(3, 40);
  cfg.warm_start = false;
  TrainedModel a = train(fs, 4, cfg);
  TrainedModel b = train(fs, 4, cfg);
  CHECK(a.loss_trace == b.loss_trace);
  CHECK(a.w_final.W.data == b.w_final.W.data);

  TrainConfig warm = cfg;
  warm.warm_start = true;
  TrainedModel c = train(fs, 4, warm);
  CHECK(a.loss_trace != c.loss_trace);
}

TEST_CASE("loss trace is finite and has length T") {
  FeatureSet fs = four_blobs(3);
  TrainConfig cfg = quick_config(4, 120);
  TrainedModel m = train(fs, 4, cfg);
  REQUIRE(m.loss_trace.size() == cfg.iterations);
  REQUIRE(m.kl_trace.size() == cfg.iterations);
  for (double v : m.loss_trace) CHECK(std::isfinite(v));
  for (double v : m.kl_trace) CHECK(std::isfinite(v));
}

TEST_CASE("well separated blobs are recovered") {
  FeatureSet fs = four_blobs(5);
  TrainConfig cfg = quick_config(11, 1500);
  TrainedModel m = train(fs, 4, cfg);
  auto labels = predict(m.theta, fs);
  auto [acc, matching] = cluster_accuracy(labels, fs.labels, 4);
  CHECK(acc >= 0.99);
}

TEST_CASE("gamma 0 on overlapped data may collapse; run stays finite") {
  // the degenerate regime the regularizer exists to prevent: observed only
  BlobSpec spec;
  spec.num_classes = 2;
  spec.dim = 8;
  spec.class_sizes = {60, 60};
  spec.separation = 0.0;
  spec.seed = 9;
  FeatureSet fs = gen_gaussian_blobs(spec);
  TrainConfig cfg;
  cfg.iterations = 200;
  cfg.gamma = 0.0;
  cfg.target_mode = TargetMode::softmax;
  cfg.seed = 1;
  TrainedModel m = train(fs, 2, cfg);
  for (double v : m.loss_trace) CHECK(std::isfinite(v));
  auto dist = label_distribution(m.theta, fs, TargetMode::softmax);
  CHECK(dist.size() == 2);  // distribution may be near-degenerate, not asserted
}

TEST_CASE("train rejects degenerate input") {
  FeatureSet fs = testutil::random_features(3, 4, 1);
  TrainConfig cfg = quick_config(1, 10);
  CHECK_THROWS_AS(train(fs, 5, cfg), DataError);
}

TEST_CASE("label permutation equivariance with explicit priors") {
  FeatureSet fs = four_blobs(12, 6.0);
  const std::uint32_t c = 4;
  TrainConfig cfg;
  cfg.iterations = 50;
  cfg.gamma = 8.0;
  cfg.target_mode = TargetMode::sparsemax;
  cfg.warm_start = true;
  cfg.seed = 21;
  std::vector<double> prior = {0.4, 0.3, 0.2, 0.1};
  cfg.prior = PriorSpec::explicit_of(prior);

  Classifier theta0;
  theta0.A = testutil::random_matrix(c, fs.dim, 31, 0.2);
  theta0.b = testutil::random_vector(c, 32, 0.2);
  Hyperplane w0;
  w0.W = testutil::random_matrix(c, fs.dim + 1, 33, 0.2);

  TrainedModel base = train_from(fs, c, cfg, theta0, w0);
  auto base_labels = predict(base.theta, fs);

  // apply pi to the class axis: row pi(k) of the permuted run mirrors row k
  std::vector<std::uint32_t> pi = {2, 0, 3, 1};
  Classifier theta_p;
  theta_p.A = Matrix(c, fs.dim);
  theta_p.b.assign(c, 0.0);
  Hyperplane w_p;
  w_p.W = Matrix(c, fs.dim + 1);
  std::vector<double> prior_p(c);
  for (std::uint32_t k = 0; k < c; ++k) {
    for (std::size_t j = 0; j < fs.dim; ++j) theta_p.A(pi[k], j) = theta0.A(k, j);
    theta_p.b[pi[k]] = theta0.b[k];
    for (std::size_t j = 0; j < fs.dim + 1; ++j) w_p.W(pi[k], j) = w0.W(k, j);
    prior_p[pi[k]] = prior[k];
  }
  TrainConfig cfg_p = cfg;
  cfg_p.prior = PriorSpec::explicit_of(prior_p);
  TrainedModel permuted = train_from(fs, c, cfg_p, theta_p, w_p);
  auto perm_labels = predict(permuted.theta, fs);

  CHECK(permuted.loss_trace.back() == doctest::Approx(base.loss_trace.back()).epsilon(1e-9));
  std::size_t agree = 0;
  for (std::size_t i = 0; i < fs.n; ++i)
    if (perm_labels[i] == pi[base_labels[i]]) ++agree;
  CHECK(agree == fs.n);
}

TEST_CASE("predict basics") {
  Classifier theta;
  theta.A = Matrix(3, 3);
  theta.A(0, 0) = 1.0;
  theta.A(1, 1) = 1.0;
  theta.A(2, 2) = 1.0;
  theta.b.assign(3, 0.0);
  FeatureSet fs;
  fs.n = 3;
  fs.dim = 3;
  fs.data = {5, 0, 0, 0, 7, 0, 0, 0, 2};
  CHECK(predict(theta, fs) == std::vector<std::uint32_t>{0, 1, 2});

  // identical shift of every bias entry leaves predictions unchanged
  Classifier shifted = theta;
  for (double& v : shifted.b) v += 123.0;
  CHECK(predict(shifted, fs) == predict(theta, fs));

  // exact ties break toward the lowest index
  FeatureSet tie;
  tie.n = 1;
  tie.dim = 3;
  tie.data = {0, 0, 0};
  CHECK(predict(theta, tie) == std::vector<std::uint32_t>{0});
}

TEST_CASE("label_distribution basics") {
  const std::size_t d = 4;
  FeatureSet fs = testutil::random_features(30, d, 71);

  // zero map: uniform softmax everywhere
  Classifier zero;
  zero.A = Matrix(5, d);
  zero.b.assign(5, 0.0);
  auto dist = label_distribution(zero, fs, TargetMode::softmax);
  for (double v : dist) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));

  // zero A with a bias: every sample sees the same logits, so the mean is
  // the mode of that single vector
  Classifier biased = zero;
  biased.b = {0.5, -0.2, 0.1, 0.0, -0.4};
  auto got = label_distribution(biased, fs, TargetMode::sparsemax);
  auto want = sparsemax(biased.b);
  for (std::size_t k = 0; k < 5; ++k) CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-12));

  // softmax mode keeps every entry strictly positive
  Classifier rnd;
  rnd.A = testutil::random_matrix(5, d, 72, 0.3);
  rnd.b = testutil::random_vector(5, 73, 0.3);
  auto pos = label_distribution(rnd, fs, TargetMode::softmax);
  double sum = 0.0;
  for (double v : pos) {
    CHECK(v > 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("loss trace csv export") {
  testutil::TempDir tmp("trace");
  FeatureSet fs = four_blobs(14);
  TrainConfig cfg = quick_config(2, 12);
  TrainedModel m = train(fs, 4, cfg);
  write_loss_trace_csv(m, tmp.path("trace.csv"));
  std::string text = testutil::read_file(tmp.path("trace.csv"));
  CHECK(text.rfind("iteration,outer_loss,kl_term\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 13);  // header + 12 rows
}
