#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace turtle {

// Thrown for malformed files, invariant violations and bad dimensions.
// The CLI maps this to exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a computation produces NaN/Inf. CLI exit code 3.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense row-major matrix of doubles. Learned parameters and gradients
// live here; feature data stays float32 inside FeatureSet.
struct Matrix {
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : data(r * c, 0.0), rows(r), cols(c) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool all_finite(const Matrix& m) { return all_finite(m.data); }

// splitmix64, used to derive decorrelated sub-seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(base ^ splitmix64(a ^ splitmix64(b)));
}

// Deterministic RNG wrapper. All draws go through explicit algorithms
// (not std distributions) so sequences do not depend on the stdlib.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // uniform in [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // standard normal via Box-Muller, second value cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // unbiased integer in [0, n) by rejection
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r = gen_();
    while (r >= limit) r = gen_();
    return r % n;
  }

  // first k entries of a random permutation of {0..n-1}, partial Fisher-Yates
  std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n, std::uint32_t k) {
    std::vector<std::uint32_t> pool(n);
    for (std::uint32_t i = 0; i < n; ++i) pool[i] = i;
    for (std::uint32_t i = 0; i < k; ++i) {
      std::uint32_t j = i + static_cast<std::uint32_t>(below(n - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// mean and sample stddev (n-1 denominator; 0 for n < 2)
inline std::pair<double, double> mean_stddev(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double s2 = 0.0;
  for (double x : v) s2 += (x - m) * (x - m);
  s2 /= static_cast<double>(v.size() - 1);
  return {m, std::sqrt(s2)};
}

}  // namespace turtle
