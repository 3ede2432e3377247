#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "turtle/featureset.hpp"
#include "turtle/kernels.hpp"

namespace testutil {

inline turtle::FeatureSet random_features(std::size_t n, std::size_t d, std::uint64_t seed,
                                          std::uint32_t num_classes = 0) {
  turtle::Rng rng(seed);
  turtle::FeatureSet fs;
  fs.n = n;
  fs.dim = d;
  fs.data.resize(n * d);
  for (float& v : fs.data) v = static_cast<float>(rng.normal());
  if (num_classes > 0) {
    fs.num_classes = num_classes;
    fs.labels.resize(n);
    for (auto& l : fs.labels) l = static_cast<std::uint32_t>(rng.below(num_classes));
  }
  return fs;
}

inline turtle::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed,
                                    double scale = 1.0) {
  turtle::Rng rng(seed);
  turtle::Matrix m(r, c);
  for (double& v : m.data) v = scale * rng.normal();
  return m;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  turtle::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// Fresh per-test scratch directory under the system temp dir.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("turtle_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

 private:
  std::filesystem::path dir_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace testutil
