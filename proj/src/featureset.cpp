#include "turtle/featureset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace turtle {

namespace {

constexpr std::array<char, 8> kMagic = {'F', 'E', 'A', 'T', 'v', '1', '\0', '\0'};

void write_u64(std::ostream& os, std::uint64_t v) {
  std::array<unsigned char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b.data()), 8);
}

std::uint64_t read_u64(std::istream& is) {
  std::array<unsigned char, 8> b;
  is.read(reinterpret_cast<char*>(b.data()), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  std::array<unsigned char, 4> b;
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b.data()), 4);
}

void write_u32(std::ostream& os, std::uint32_t v) {
  std::array<unsigned char, 4> b;
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b.data()), 4);
}

std::uint32_t read_u32_raw(const unsigned char* b) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

FeatureSet load_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open feature file: " + path);

  std::array<char, 8> magic;
  is.read(magic.data(), 8);
  if (!is || magic != kMagic) throw DataError("bad magic in feature file: " + path);

  std::uint64_t n = read_u64(is);
  std::uint64_t d = read_u64(is);
  char has_labels = 0;
  is.read(&has_labels, 1);
  std::array<char, 7> pad;
  is.read(pad.data(), 7);
  if (!is) throw DataError("truncated header in feature file: " + path);
  if (n == 0 || d == 0) throw DataError("feature file declares empty matrix: " + path);

  FeatureSet fs;
  fs.n = n;
  fs.dim = d;
  fs.data.resize(n * d);
  std::vector<unsigned char> buf(n * d * 4);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!is) throw DataError("truncated data section in feature file: " + path);
  for (std::size_t i = 0; i < fs.data.size(); ++i) {
    std::uint32_t bits = read_u32_raw(&buf[i * 4]);
    float v;
    std::memcpy(&v, &bits, 4);
    fs.data[i] = v;
  }

  if (has_labels) {
    std::uint64_t c = read_u64(is);
    if (!is) throw DataError("truncated label header in feature file: " + path);
    fs.num_classes = static_cast<std::uint32_t>(c);
    fs.labels.resize(n);
    std::vector<unsigned char> lbuf(n * 4);
    is.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(lbuf.size()));
    if (!is) throw DataError("truncated label section in feature file: " + path);
    for (std::size_t i = 0; i < n; ++i) fs.labels[i] = read_u32_raw(&lbuf[i * 4]);
  }
  fs.validate();
  return fs;
}

FeatureSet load_csv(const std::string& path, bool csv_labels) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open feature file: " + path);

  FeatureSet fs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        std::size_t pos = 0;
        double v = std::stod(tok, &pos);
        while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos]))) ++pos;
        if (pos != tok.size()) throw std::invalid_argument(tok);
        vals.push_back(v);
      } catch (const std::exception&) {
        throw DataError("csv parse error at line " + std::to_string(lineno) + ": '" + tok + "'");
      }
    }
    std::size_t ncols = vals.size();
    std::size_t d = csv_labels ? ncols - 1 : ncols;
    if (csv_labels && ncols < 2)
      throw DataError("csv line " + std::to_string(lineno) + " too short for a label column");
    if (d == 0) throw DataError("csv line " + std::to_string(lineno) + " has no columns");
    if (fs.n == 0) {
      fs.dim = d;
    } else if (d != fs.dim) {
      throw DataError("csv line " + std::to_string(lineno) + " has " + std::to_string(d) +
                      " feature columns, expected " + std::to_string(fs.dim));
    }
    for (std::size_t j = 0; j < d; ++j) fs.data.push_back(static_cast<float>(vals[j]));
    if (csv_labels) {
      double lv = vals[ncols - 1];
      if (lv < 0 || lv != std::floor(lv))
        throw DataError("csv line " + std::to_string(lineno) + ": label must be a nonnegative integer");
      fs.labels.push_back(static_cast<std::uint32_t>(lv));
    }
    ++fs.n;
  }
  if (fs.n == 0) throw DataError("csv file is empty: " + path);
  if (csv_labels) {
    std::uint32_t maxl = *std::max_element(fs.labels.begin(), fs.labels.end());
    fs.num_classes = maxl + 1;
  }
  fs.validate();
  return fs;
}

void save_binary(const FeatureSet& fs, const std::string& path) {
  namespace fsys = std::filesystem;
  fsys::path target(path);
  fsys::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open output file: " + tmp.string());
    os.write(kMagic.data(), 8);
    write_u64(os, fs.n);
    write_u64(os, fs.dim);
    char hl = fs.has_labels() ? 1 : 0;
    os.write(&hl, 1);
    static const char pad[7] = {0, 0, 0, 0, 0, 0, 0};
    os.write(pad, 7);
    for (float v : fs.data) write_f32(os, v);
    if (fs.has_labels()) {
      write_u64(os, fs.num_classes);
      for (std::uint32_t l : fs.labels) write_u32(os, l);
    }
    if (!os) throw DataError("write failure: " + tmp.string());
  }
  fsys::rename(tmp, target);
}

void save_csv(const FeatureSet& fs, const std::string& path) {
  namespace fsys = std::filesystem;
  fsys::path target(path);
  fsys::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw DataError("cannot open output file: " + tmp.string());
    char buf[64];
    for (std::size_t i = 0; i < fs.n; ++i) {
      for (std::size_t j = 0; j < fs.dim; ++j) {
        std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(fs.row(i)[j]));
        if (j) os << ',';
        os << buf;
      }
      if (fs.has_labels()) os << ',' << fs.labels[i];
      os << '\n';
    }
    if (!os) throw DataError("write failure: " + tmp.string());
  }
  fsys::rename(tmp, target);
}

}  // namespace

void FeatureSet::validate() const {
  if (n == 0 || dim == 0) throw DataError("FeatureSet must have N >= 1 and d >= 1");
  if (data.size() != n * dim) throw DataError("FeatureSet data size does not match N x d");
  for (float v : data)
    if (!std::isfinite(v)) throw DataError("FeatureSet contains non-finite entries");
  if (!labels.empty()) {
    if (labels.size() != n) throw DataError("label vector length does not match N");
    if (num_classes == 0) throw DataError("labeled FeatureSet must declare num_classes");
    for (std::uint32_t l : labels)
      if (l >= num_classes)
        throw DataError("label " + std::to_string(l) + " out of range for C=" + std::to_string(num_classes));
  }
}

void BlobSpec::validate() const {
  if (num_classes == 0) throw DataError("BlobSpec: num_classes must be positive");
  if (dim == 0) throw DataError("BlobSpec: dim must be positive");
  if (class_sizes.size() != num_classes) throw DataError("BlobSpec: class_sizes length must equal num_classes");
  for (std::size_t s : class_sizes)
    if (s == 0) throw DataError("BlobSpec: every class size must be positive");
  if (separation < 0) throw DataError("BlobSpec: separation must be nonnegative");
  if (!(noise_std > 0)) throw DataError("BlobSpec: noise_std must be positive");
}

FeatureSet load_features(const std::string& path, FileFormat format, bool csv_labels) {
  return format == FileFormat::binary ? load_binary(path) : load_csv(path, csv_labels);
}

void save_features(const FeatureSet& fs, const std::string& path, FileFormat format) {
  fs.validate();
  if (format == FileFormat::binary)
    save_binary(fs, path);
  else
    save_csv(fs, path);
}

std::vector<std::size_t> powerlaw_sizes(std::size_t total, std::uint32_t num_classes, double alpha) {
  if (num_classes == 0) throw DataError("powerlaw_sizes: num_classes must be positive");
  if (alpha < 0) throw DataError("powerlaw_sizes: alpha must be nonnegative");
  if (total < num_classes)
    throw DataError("powerlaw_sizes: total " + std::to_string(total) + " cannot give every class one sample");

  const std::size_t c = num_classes;
  std::vector<double> w(c);
  double wsum = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    w[i] = std::pow(static_cast<double>(i + 1), -alpha);
    wsum += w[i];
  }

  std::vector<std::size_t> sizes(c);
  std::vector<double> rem(c);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < c; ++i) {
    double quota = static_cast<double>(total) * w[i] / wsum;
    sizes[i] = static_cast<std::size_t>(std::floor(quota));
    rem[i] = quota - std::floor(quota);
    assigned += sizes[i];
  }

  // largest-remainder distribution of the leftover, ties to the lower index
  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < total; ++k) {
    sizes[order[k % c]] += 1;
    ++assigned;
  }

  // floor of one per class; take from the rightmost maximum so the
  // non-increasing ordering is preserved
  std::size_t surplus = 0;
  for (std::size_t i = 0; i < c; ++i)
    if (sizes[i] == 0) {
      sizes[i] = 1;
      ++surplus;
    }
  while (surplus > 0) {
    std::size_t arg = 0;
    for (std::size_t i = 0; i < c; ++i)
      if (sizes[i] >= sizes[arg]) arg = i;
    sizes[arg] -= 1;
    --surplus;
  }
  return sizes;
}

FeatureSet subsample_powerlaw(const FeatureSet& fs, double alpha, std::uint64_t seed) {
  fs.validate();
  if (!fs.has_labels()) throw DataError("subsample_powerlaw requires a labeled FeatureSet");
  const std::uint32_t c = fs.num_classes;

  std::vector<std::vector<std::uint32_t>> by_class(c);
  for (std::size_t i = 0; i < fs.n; ++i) by_class[fs.labels[i]].push_back(static_cast<std::uint32_t>(i));
  for (std::uint32_t k = 0; k < c; ++k)
    if (by_class[k].empty())
      throw DataError("subsample_powerlaw: class " + std::to_string(k) + " has no samples");

  auto fits = [&](std::size_t m) {
    auto t = powerlaw_sizes(m, c, alpha);
    for (std::uint32_t k = 0; k < c; ++k)
      if (t[k] > by_class[k].size()) return false;
    return true;
  };

  // largest total M <= N whose power-law targets fit the available counts;
  // start from the continuous bound and walk down
  std::vector<double> w(c);
  double wsum = 0.0;
  for (std::uint32_t k = 0; k < c; ++k) {
    w[k] = std::pow(static_cast<double>(k + 1), -alpha);
    wsum += w[k];
  }
  std::size_t m = fs.n;
  for (std::uint32_t k = 0; k < c; ++k) {
    double bound = static_cast<double>(by_class[k].size()) * wsum / w[k];
    m = std::min(m, static_cast<std::size_t>(std::floor(bound)));
  }
  m = std::max<std::size_t>(m, c);
  while (m > c && !fits(m)) --m;
  auto targets = powerlaw_sizes(m, c, alpha);

  Rng rng(seed);
  std::vector<std::uint32_t> keep;
  keep.reserve(m);
  for (std::uint32_t k = 0; k < c; ++k) {
    auto pick = rng.sample_without_replacement(static_cast<std::uint32_t>(by_class[k].size()),
                                               static_cast<std::uint32_t>(targets[k]));
    for (std::uint32_t p : pick) keep.push_back(by_class[k][p]);
  }
  std::sort(keep.begin(), keep.end());

  FeatureSet out;
  out.n = keep.size();
  out.dim = fs.dim;
  out.num_classes = c;
  out.data.reserve(out.n * out.dim);
  out.labels.reserve(out.n);
  for (std::uint32_t idx : keep) {
    const float* r = fs.row(idx);
    out.data.insert(out.data.end(), r, r + fs.dim);
    out.labels.push_back(fs.labels[idx]);
  }
  return out;
}

FeatureSet gen_gaussian_blobs(const BlobSpec& spec) {
  spec.validate();
  const std::uint32_t c = spec.num_classes;
  const std::size_t d = spec.dim;
  Rng rng(spec.seed);

  Matrix centroids(c, d);
  for (std::uint32_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < d; ++j) centroids(i, j) = rng.normal();

  if (c > 1) {
    double min_dist = std::numeric_limits<double>::infinity();
    for (std::uint32_t a = 0; a < c; ++a)
      for (std::uint32_t b = a + 1; b < c; ++b) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          double diff = centroids(a, j) - centroids(b, j);
          s += diff * diff;
        }
        min_dist = std::min(min_dist, std::sqrt(s));
      }
    double target = spec.separation * spec.noise_std;
    double scale = min_dist > 0 ? target / min_dist : 0.0;
    for (double& v : centroids.data) v *= scale;
  }

  FeatureSet fs;
  fs.dim = d;
  fs.num_classes = c;
  for (std::uint32_t k = 0; k < c; ++k) {
    for (std::size_t s = 0; s < spec.class_sizes[k]; ++s) {
      for (std::size_t j = 0; j < d; ++j)
        fs.data.push_back(static_cast<float>(centroids(k, j) + spec.noise_std * rng.normal()));
      fs.labels.push_back(k);
      ++fs.n;
    }
  }
  fs.validate();
  return fs;
}

FeatureSet normalize_rows(const FeatureSet& fs, NormalizeMode mode) {
  fs.validate();
  if (mode == NormalizeMode::none) return fs;
  FeatureSet out = fs;
  if (mode == NormalizeMode::l2) {
    for (std::size_t i = 0; i < out.n; ++i) {
      float* r = out.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < out.dim; ++j) s += static_cast<double>(r[j]) * r[j];
      double norm = std::sqrt(s);
      if (norm > 0.0)
        for (std::size_t j = 0; j < out.dim; ++j) r[j] = static_cast<float>(r[j] / norm);
    }
  } else {
    for (std::size_t j = 0; j < out.dim; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < out.n; ++i) mean += out.row(i)[j];
      mean /= static_cast<double>(out.n);
      double var = 0.0;
      for (std::size_t i = 0; i < out.n; ++i) {
        double dlt = out.row(i)[j] - mean;
        var += dlt * dlt;
      }
      var /= static_cast<double>(out.n);
      double sd = std::sqrt(var);
      for (std::size_t i = 0; i < out.n; ++i) {
        double v = out.row(i)[j] - mean;
        out.row(i)[j] = static_cast<float>(sd > 0.0 ? v / sd : v);
      }
    }
  }
  return out;
}

NormalizeMode parse_normalize_mode(const std::string& s) {
  if (s == "none") return NormalizeMode::none;
  if (s == "l2") return NormalizeMode::l2;
  if (s == "standardize") return NormalizeMode::standardize;
  throw DataError("unknown normalize mode: " + s);
}

}  // namespace turtle
