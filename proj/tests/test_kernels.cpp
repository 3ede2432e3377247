#include <doctest.h>

#include "test_util.hpp"
#include "turtle/kernels.hpp"

using namespace turtle;

// The OpenMP kernels must agree with the serial reference bit for bit:
// every per-cell reduction runs in the same order in both.

namespace {

struct Shape {
  std::size_t b, c, d;
};

// sizes on both sides of the parallelization guards
const Shape kShapes[] = {{3, 2, 4}, {17, 5, 16}, {600, 5, 16}, {257, 11, 33}, {1024, 10, 64}};

}  // namespace

TEST_CASE("affine_logits matches serial exactly") {
  for (auto [b, c, d] : kShapes) {
    FeatureSet fs = testutil::random_features(b, d, b + d);
    Matrix wb = testutil::random_matrix(c, d + 1, c + 7);
    BatchRef batch = BatchRef::all(fs);
    Matrix fast, slow;
    kernels::affine_logits(wb, batch, fast);
    serial::affine_logits(wb, batch, slow);
    REQUIRE(fast.data == slow.data);
  }
}

TEST_CASE("affine_logits honors index subsets") {
  FeatureSet fs = testutil::random_features(50, 8, 3);
  Matrix wb = testutil::random_matrix(4, 9, 5);
  std::vector<std::uint32_t> idx = {49, 0, 17, 17, 3};
  Matrix fast, slow;
  kernels::affine_logits(wb, BatchRef::of(fs, idx), fast);
  serial::affine_logits(wb, BatchRef::of(fs, idx), slow);
  REQUIRE(fast.data == slow.data);
  CHECK(fast.rows == 5);
}

TEST_CASE("ce_forward matches serial exactly") {
  for (auto [b, c, d] : kShapes) {
    Matrix logits = testutil::random_matrix(b, c, b + 1);
    Matrix targets(b, c);
    Rng rng(b + 2);
    for (std::size_t n = 0; n < b; ++n) {
      double sum = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        targets(n, k) = rng.uniform();
        sum += targets(n, k);
      }
      for (std::size_t k = 0; k < c; ++k) targets(n, k) /= sum;
    }
    Matrix p1, p2;
    std::vector<double> l1, l2, e1, e2;
    kernels::ce_forward(logits, targets, p1, l1, e1);
    serial::ce_forward(logits, targets, p2, l2, e2);
    REQUIRE(p1.data == p2.data);
    REQUIRE(l1 == l2);
    REQUIRE(e1 == e2);
  }
}

TEST_CASE("row squashing matches serial exactly") {
  for (auto [b, c, d] : kShapes) {
    Matrix logits = testutil::random_matrix(b, c, b + 11);
    Matrix s1, s2, m1, m2;
    kernels::rows_softmax(logits, s1);
    serial::rows_softmax(logits, s2);
    REQUIRE(s1.data == s2.data);
    kernels::rows_sparsemax(logits, m1);
    serial::rows_sparsemax(logits, m2);
    REQUIRE(m1.data == m2.data);
  }
}

TEST_CASE("accumulate_grad matches serial exactly") {
  for (auto [b, c, d] : kShapes) {
    FeatureSet fs = testutil::random_features(b, d, b + 5);
    Matrix up = testutil::random_matrix(b, c, b + 6);
    BatchRef batch = BatchRef::all(fs);
    Matrix g1(c, d + 1), g2(c, d + 1);
    kernels::accumulate_grad(up, batch, 1.0 / static_cast<double>(b), g1);
    serial::accumulate_grad(up, batch, 1.0 / static_cast<double>(b), g2);
    REQUIRE(g1.data == g2.data);
  }
}

TEST_CASE("argmax and assignment match serial exactly") {
  for (auto [b, c, d] : kShapes) {
    Matrix logits = testutil::random_matrix(b, c, b + 9);
    std::vector<std::uint32_t> a1, a2;
    kernels::argmax_rows(logits, a1);
    serial::argmax_rows(logits, a2);
    REQUIRE(a1 == a2);

    FeatureSet fs = testutil::random_features(b, d, b + 10);
    Matrix centroids = testutil::random_matrix(c, d, b + 12);
    BatchRef batch = BatchRef::all(fs);
    std::vector<std::uint32_t> l1, l2;
    std::vector<double> d1, d2;
    kernels::assign_nearest(batch, centroids, l1, d1);
    serial::assign_nearest(batch, centroids, l2, d2);
    REQUIRE(l1 == l2);
    REQUIRE(d1 == d2);
  }
}

TEST_CASE("argmax ties resolve to the lowest index") {
  Matrix logits(2, 3);
  logits(0, 0) = 1.0;
  logits(0, 1) = 1.0;
  logits(0, 2) = 0.0;
  logits(1, 0) = -2.0;
  logits(1, 1) = 5.0;
  logits(1, 2) = 5.0;
  std::vector<std::uint32_t> labels;
  kernels::argmax_rows(logits, labels);
  CHECK(labels == std::vector<std::uint32_t>{0, 1});
}
