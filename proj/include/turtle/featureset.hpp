#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "turtle/common.hpp"

namespace turtle {

// N x d float32 feature matrix with optional ground-truth labels.
struct FeatureSet {
  std::vector<float> data;  // row-major, n * dim entries
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<std::uint32_t> labels;  // empty or length n
  std::uint32_t num_classes = 0;      // 0 when unlabeled

  bool has_labels() const { return !labels.empty(); }
  const float* row(std::size_t i) const { return data.data() + i * dim; }
  float* row(std::size_t i) { return data.data() + i * dim; }

  // Throws DataError on any invariant violation (empty, non-finite,
  // label length/range mismatches).
  void validate() const;
};

enum class FileFormat { binary, csv };

struct BlobSpec {
  std::uint32_t num_classes = 0;
  std::size_t dim = 0;
  std::vector<std::size_t> class_sizes;
  double separation = 0.0;  // inter-centroid distance in units of noise_std
  double noise_std = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class NormalizeMode { none, l2, standardize };

FeatureSet load_features(const std::string& path, FileFormat format, bool csv_labels = false);
void save_features(const FeatureSet& fs, const std::string& path, FileFormat format);

// Per-class sample counts proportional to (c+1)^-alpha, largest-remainder
// rounded to sum exactly to total, with a floor of one sample per class.
std::vector<std::size_t> powerlaw_sizes(std::size_t total, std::uint32_t num_classes, double alpha);

// Seeded without-replacement subsample whose class histogram follows
// powerlaw_sizes for the largest total that fits the available counts.
FeatureSet subsample_powerlaw(const FeatureSet& fs, double alpha, std::uint64_t seed);

FeatureSet gen_gaussian_blobs(const BlobSpec& spec);

FeatureSet normalize_rows(const FeatureSet& fs, NormalizeMode mode);

NormalizeMode parse_normalize_mode(const std::string& s);

}  // namespace turtle
