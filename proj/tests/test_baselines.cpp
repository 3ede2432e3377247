#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "turtle/assignment.hpp"
#include "turtle/baselines.hpp"

using namespace turtle;

TEST_CASE("kmeans with one cluster returns the mean") {
  FeatureSet fs = testutil::random_features(50, 3, 1);
  KMeansResult res = kmeans_pp(fs, 1, 0);
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < fs.n; ++i) mean += fs.row(i)[j];
    mean /= static_cast<double>(fs.n);
    CHECK(res.centroids(0, j) == doctest::Approx(mean).epsilon(1e-6));
  }
  double inertia = 0.0;
  for (std::size_t i = 0; i < fs.n; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double d = fs.row(i)[j] - res.centroids(0, j);
      inertia += d * d;
    }
  CHECK(res.inertia == doctest::Approx(inertia).epsilon(1e-9));
}

TEST_CASE("kmeans separates two obvious 1-d clusters") {
  FeatureSet fs;
  fs.n = 4;
  fs.dim = 1;
  fs.data = {0.0f, 0.1f, 10.0f, 10.1f};
  KMeansResult res = kmeans_pp(fs, 2, 5);
  CHECK(res.labels[0] == res.labels[1]);
  CHECK(res.labels[2] == res.labels[3]);
  CHECK(res.labels[0] != res.labels[2]);
  double lo = std::min(res.centroids(0, 0), res.centroids(1, 0));
  double hi = std::max(res.centroids(0, 0), res.centroids(1, 0));
  CHECK(lo == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(hi == doctest::Approx(10.05).epsilon(1e-6));
}

TEST_CASE("kmeans determinism and monotone inertia") {
  FeatureSet fs = testutil::random_features(300, 6, 2);
  KMeansResult a = kmeans_pp(fs, 5, 42);
  KMeansResult b = kmeans_pp(fs, 5, 42);
  CHECK(a.labels == b.labels);
  CHECK(a.centroids.data == b.centroids.data);
  for (std::size_t i = 1; i < a.inertia_trace.size(); ++i)
    CHECK(a.inertia_trace[i] <= a.inertia_trace[i - 1] + 1e-9);
  CHECK_THROWS_AS(kmeans_pp(fs, 301, 0), DataError);
}

TEST_CASE("kmeans recovers well separated blobs perfectly") {
  BlobSpec spec;
  spec.num_classes = 2;
  spec.dim = 2;
  spec.class_sizes = {40, 40};
  spec.separation = 20;
  spec.seed = 7;
  FeatureSet fs = gen_gaussian_blobs(spec);
  KMeansResult res = kmeans_pp(fs, 2, 3);
  auto [acc, matching] = cluster_accuracy(res.labels, fs.labels, 2);
  CHECK(acc == 1.0);
}

TEST_CASE("linear probe achieves perfect accuracy on separable data") {
  BlobSpec spec;
  spec.num_classes = 2;
  spec.dim = 2;
  spec.class_sizes = {50, 50};
  spec.separation = 12;
  spec.seed = 11;
  FeatureSet fs = gen_gaussian_blobs(spec);
  ProbeResult res = linear_probe(fs, fs.labels, 2, 0.8, 1);
  CHECK(res.val_accuracy == 1.0);
}

TEST_CASE("linear probe on shuffled labels sits at chance level") {
  FeatureSet fs = testutil::random_features(400, 8, 13, 4);
  std::vector<double> accs;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    std::vector<std::uint32_t> shuffled(fs.n);
    for (auto& l : shuffled) l = static_cast<std::uint32_t>(rng.below(4));
    ProbeResult res = linear_probe(fs, shuffled, 4, 0.8, seed);
    accs.push_back(res.val_accuracy);
  }
  auto [mean, stddev] = mean_stddev(accs);
  CHECK(mean > 0.15);
  CHECK(mean < 0.35);
}

TEST_CASE("linear probe rejects a full train fraction") {
  FeatureSet fs = testutil::random_features(20, 3, 17, 2);
  CHECK_THROWS_AS(linear_probe(fs, fs.labels, 2, 1.0, 0), DataError);
  CHECK_THROWS_AS(linear_probe(fs, fs.labels, 2, 0.0, 0), DataError);
}

TEST_CASE("logreg loss is monotone on separable data at small eta") {
  BlobSpec spec;
  spec.num_classes = 2;
  spec.dim = 2;
  spec.class_sizes = {30, 30};
  spec.separation = 10;
  spec.seed = 19;
  FeatureSet fs = gen_gaussian_blobs(spec);
  auto [wb, trace] = logreg_fit(BatchRef::all(fs), fs.labels, 2, 200, 0.005);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
}

TEST_CASE("kmeans assignment is distance-preserving under rotation") {
  // rotating data and centroids together preserves assignments
  FeatureSet fs = testutil::random_features(100, 2, 23);
  Matrix cents = testutil::random_matrix(3, 2, 24);
  const double c = std::cos(0.7), s = std::sin(0.7);
  FeatureSet rot = fs;
  for (std::size_t i = 0; i < fs.n; ++i) {
    rot.row(i)[0] = static_cast<float>(c * fs.row(i)[0] - s * fs.row(i)[1]);
    rot.row(i)[1] = static_cast<float>(s * fs.row(i)[0] + c * fs.row(i)[1]);
  }
  Matrix rcents(3, 2);
  for (std::size_t k = 0; k < 3; ++k) {
    rcents(k, 0) = c * cents(k, 0) - s * cents(k, 1);
    rcents(k, 1) = s * cents(k, 0) + c * cents(k, 1);
  }
  std::vector<std::uint32_t> l1, l2;
  std::vector<double> d1, d2;
  kernels::assign_nearest(BatchRef::all(fs), cents, l1, d1);
  kernels::assign_nearest(BatchRef::all(rot), rcents, l2, d2);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < l1.size(); ++i)
    if (l1[i] == l2[i]) ++agree;
  CHECK(agree == l1.size());  // float rotation noise cannot flip these margins
}
