#include "turtle/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace turtle {

namespace {

// Jonker-Volgenant style shortest augmenting path solver. Returns the
// column assigned to each row plus feasible dual potentials (u, v) with
// u[i] + v[j] <= cost[i][j] and equality on assigned edges.
void solve_lap(const Matrix& cost, std::vector<int>& row_to_col, std::vector<double>& u,
               std::vector<double>& v) {
  const int n = static_cast<int>(cost.rows);
  const double inf = std::numeric_limits<double>::infinity();
  u.assign(n + 1, 0.0);
  v.assign(n + 1, 0.0);
  std::vector<int> p(n + 1, 0);  // p[j]: row matched to column j (1-based)
  std::vector<int> way(n + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  row_to_col.assign(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
}

// Kuhn augmenting path over the zero-reduced-cost graph.
bool try_augment(int row, const std::vector<std::vector<int>>& adj, std::vector<char>& visited,
                 std::vector<int>& col_match) {
  for (int j : adj[row]) {
    if (visited[j]) continue;
    visited[j] = 1;
    if (col_match[j] < 0 || try_augment(col_match[j], adj, visited, col_match)) {
      col_match[j] = row;
      return true;
    }
  }
  return false;
}

// Can rows `start..n-1` be perfectly matched into columns not in `banned`?
bool feasible(int start, int n, const std::vector<std::vector<int>>& adj,
              const std::vector<char>& banned) {
  std::vector<int> col_match(n, -1);
  for (int j = 0; j < n; ++j)
    if (banned[j]) col_match[j] = n;  // sentinel: column taken
  for (int i = start; i < n; ++i) {
    std::vector<char> visited(banned.begin(), banned.end());
    if (!try_augment(i, adj, visited, col_match)) return false;
  }
  return true;
}

}  // namespace

Matching hungarian(const Matrix& cost) {
  if (cost.rows == 0 || cost.rows != cost.cols) throw DataError("hungarian: cost matrix must be square");
  if (!all_finite(cost)) throw DataError("hungarian: cost matrix must be finite");
  const int n = static_cast<int>(cost.rows);

  std::vector<int> row_to_col;
  std::vector<double> u, v;
  solve_lap(cost, row_to_col, u, v);

  // Every optimal assignment lies in the zero-reduced-cost graph
  // (complementary slackness), and every perfect matching of that graph is
  // optimal. Walk rows in order, taking the smallest column that still
  // leaves the rest matchable: the lexicographically smallest optimum.
  double max_abs = 0.0;
  for (double x : cost.data) max_abs = std::max(max_abs, std::abs(x));
  const double eps = 1e-9 * (1.0 + max_abs);

  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (cost(i, j) - u[i + 1] - v[j + 1] <= eps) adj[i].push_back(j);

  std::vector<char> banned(n, 0);
  Matching m;
  m.perm.resize(n);
  for (int i = 0; i < n; ++i) {
    bool fixed = false;
    for (int j : adj[i]) {
      if (banned[j]) continue;
      banned[j] = 1;
      if (feasible(i + 1, n, adj, banned)) {
        m.perm[i] = static_cast<std::uint32_t>(j);
        fixed = true;
        break;
      }
      banned[j] = 0;
    }
    if (!fixed) {
      // fall back to the solver's own column (always feasible)
      int j = row_to_col[i];
      banned[j] = 1;
      m.perm[i] = static_cast<std::uint32_t>(j);
    }
  }

  m.total_cost = 0.0;
  for (int i = 0; i < n; ++i) m.total_cost += cost(i, m.perm[i]);
  return m;
}

std::pair<double, Matching> cluster_accuracy(const std::vector<std::uint32_t>& pred,
                                             const std::vector<std::uint32_t>& truth,
                                             std::uint32_t num_classes) {
  if (pred.size() != truth.size()) throw DataError("cluster_accuracy: label length mismatch");
  if (pred.empty()) throw DataError("cluster_accuracy: empty labels");
  Matrix counts(num_classes, num_classes);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= num_classes || truth[i] >= num_classes)
      throw DataError("cluster_accuracy: label out of range");
    counts(pred[i], truth[i]) += 1.0;
  }
  Matrix neg(num_classes, num_classes);
  for (std::size_t i = 0; i < neg.data.size(); ++i) neg.data[i] = -counts.data[i];
  Matching m = hungarian(neg);
  double matched = 0.0;
  for (std::uint32_t i = 0; i < num_classes; ++i) matched += counts(i, m.perm[i]);
  return {matched / static_cast<double>(pred.size()), m};
}

Matrix confusion_matrix(const std::vector<std::uint32_t>& pred,
                        const std::vector<std::uint32_t>& truth,
                        const Matching& matching) {
  if (pred.size() != truth.size()) throw DataError("confusion_matrix: label length mismatch");
  const std::uint32_t c = static_cast<std::uint32_t>(matching.perm.size());
  Matrix conf(c, c);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= c || truth[i] >= c) throw DataError("confusion_matrix: label out of range");
    conf(matching.perm[pred[i]], truth[i]) += 1.0;
  }
  return conf;
}

}  // namespace turtle
