#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "test_util.hpp"
#include "turtle/assignment.hpp"

using namespace turtle;

namespace {

// Exhaustive assignment oracle with lexicographic tie-break.
Matching brute_force(const Matrix& cost) {
  const std::size_t n = cost.rows;
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  Matching best;
  best.total_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += cost(i, perm[i]);
    if (c < best.total_cost - 1e-12 ||
        (std::abs(c - best.total_cost) <= 1e-12 && perm < best.perm)) {
      best.total_cost = c;
      best.perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("hungarian worked examples") {
  Matrix a(2, 2);
  a(0, 0) = 0;
  a(0, 1) = 1;
  a(1, 0) = 1;
  a(1, 1) = 0;
  Matching m = hungarian(a);
  CHECK(m.perm == std::vector<std::uint32_t>{0, 1});
  CHECK(m.total_cost == 0.0);

  Matrix b(2, 2);
  b(0, 0) = 4;
  b(0, 1) = 1;
  b(1, 0) = 2;
  b(1, 1) = 3;
  Matching mb = hungarian(b);
  CHECK(mb.perm == std::vector<std::uint32_t>{1, 0});
  CHECK(mb.total_cost == 3.0);
}

TEST_CASE("hungarian equals exhaustive search") {
  Rng rng(31);
  for (int rep = 0; rep < 60; ++rep) {
    std::size_t n = 2 + rng.below(6);  // up to 7x7
    Matrix cost(n, n);
    for (double& v : cost.data) v = 10.0 * rng.uniform();
    Matching fast = hungarian(cost);
    Matching slow = brute_force(cost);
    CHECK(fast.total_cost == doctest::Approx(slow.total_cost).epsilon(1e-12));
    CHECK(fast.perm == slow.perm);
  }
}

TEST_CASE("hungarian tie-break is lexicographic") {
  Matrix zeros(3, 3);
  Matching m = hungarian(zeros);
  CHECK(m.perm == std::vector<std::uint32_t>{0, 1, 2});

  // integer ties exercised against the oracle
  Rng rng(33);
  for (int rep = 0; rep < 40; ++rep) {
    std::size_t n = 2 + rng.below(4);
    Matrix cost(n, n);
    for (double& v : cost.data) v = static_cast<double>(rng.below(3));
    Matching fast = hungarian(cost);
    Matching slow = brute_force(cost);
    CHECK(fast.total_cost == doctest::Approx(slow.total_cost));
    CHECK(fast.perm == slow.perm);
  }
}

TEST_CASE("hungarian rejects bad input") {
  Matrix rect(2, 3);
  CHECK_THROWS_AS(hungarian(rect), DataError);
  Matrix nan(2, 2);
  nan(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(hungarian(nan), DataError);
}

TEST_CASE("cluster accuracy") {
  std::vector<std::uint32_t> truth = {0, 0, 1, 1, 2, 2};
  auto [acc_same, m_same] = cluster_accuracy(truth, truth, 3);
  CHECK(acc_same == 1.0);

  // any relabeling of predictions still scores 1.0
  std::vector<std::uint32_t> permuted = {1, 1, 2, 2, 0, 0};
  auto [acc_perm, m_perm] = cluster_accuracy(permuted, truth, 3);
  CHECK(acc_perm == 1.0);
  CHECK(m_perm.perm == std::vector<std::uint32_t>{2, 0, 1});
}

TEST_CASE("cluster accuracy from a known count matrix") {
  // counts [[5,1],[2,8]]: 5+1 pred 0, 2+8 pred 1
  std::vector<std::uint32_t> pred, truth;
  auto add = [&](std::uint32_t p, std::uint32_t t, int k) {
    for (int i = 0; i < k; ++i) {
      pred.push_back(p);
      truth.push_back(t);
    }
  };
  add(0, 0, 5);
  add(0, 1, 1);
  add(1, 0, 2);
  add(1, 1, 8);
  auto [acc, m] = cluster_accuracy(pred, truth, 2);
  CHECK(acc == doctest::Approx(13.0 / 16.0));
  CHECK(m.perm == std::vector<std::uint32_t>{0, 1});
}

TEST_CASE("confusion matrix") {
  std::vector<std::uint32_t> truth = {0, 0, 0, 1, 1, 2};
  auto [acc, m] = cluster_accuracy(truth, truth, 3);
  Matrix conf = confusion_matrix(truth, truth, m);
  CHECK(conf(0, 0) == 3.0);
  CHECK(conf(1, 1) == 2.0);
  CHECK(conf(2, 2) == 1.0);
  CHECK(conf(0, 1) == 0.0);

  // anti-matched two-class predictions become diagonal after matching
  std::vector<std::uint32_t> t2 = {0, 0, 1, 1};
  std::vector<std::uint32_t> p2 = {1, 1, 0, 0};
  auto [acc2, m2] = cluster_accuracy(p2, t2, 2);
  CHECK(acc2 == 1.0);
  Matrix conf2 = confusion_matrix(p2, t2, m2);
  CHECK(conf2(0, 0) == 2.0);
  CHECK(conf2(1, 1) == 2.0);
  CHECK(conf2(0, 1) == 0.0);
  CHECK(conf2(1, 0) == 0.0);
}

TEST_CASE("confusion matrix conservation and trace identity") {
  Rng rng(37);
  for (int rep = 0; rep < 20; ++rep) {
    std::uint32_t c = 2 + static_cast<std::uint32_t>(rng.below(5));
    std::size_t n = 20 + rng.below(100);
    std::vector<std::uint32_t> pred(n), truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = static_cast<std::uint32_t>(rng.below(c));
      truth[i] = static_cast<std::uint32_t>(rng.below(c));
    }
    auto [acc, m] = cluster_accuracy(pred, truth, c);
    Matrix conf = confusion_matrix(pred, truth, m);
    double total = 0.0, trace = 0.0;
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        total += conf(i, j);
        if (i == j) trace += conf(i, j);
      }
    CHECK(total == doctest::Approx(static_cast<double>(n)));
    CHECK(trace / static_cast<double>(n) == doctest::Approx(acc));
  }
}

TEST_CASE("cluster accuracy is invariant to relabelings of either side") {
  Rng rng(41);
  const std::uint32_t c = 4;
  std::vector<std::uint32_t> pred(60), truth(60);
  for (std::size_t i = 0; i < 60; ++i) {
    pred[i] = static_cast<std::uint32_t>(rng.below(c));
    truth[i] = static_cast<std::uint32_t>(rng.below(c));
  }
  auto [base, m0] = cluster_accuracy(pred, truth, c);
  std::vector<std::uint32_t> relabel = {2, 0, 3, 1};
  std::vector<std::uint32_t> pred2(60), truth2(60);
  for (std::size_t i = 0; i < 60; ++i) {
    pred2[i] = relabel[pred[i]];
    truth2[i] = relabel[truth[i]];
  }
  auto [a1, m1] = cluster_accuracy(pred2, truth, c);
  auto [a2, m2] = cluster_accuracy(pred, truth2, c);
  CHECK(a1 == doctest::Approx(base));
  CHECK(a2 == doctest::Approx(base));
}
