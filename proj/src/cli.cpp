#include "turtle/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "turtle/assignment.hpp"
#include "turtle/baselines.hpp"
#include "turtle/featureset.hpp"
#include "turtle/modelselect.hpp"
#include "turtle/trainer.hpp"

namespace turtle::cli {

namespace {

namespace fsys = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- utilities

void write_text_atomic(const std::string& path, const std::string& content) {
  fsys::path target(path);
  if (target.has_parent_path()) fsys::create_directories(target.parent_path());
  fsys::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open output file: " + tmp.string());
    os << content;
    if (!os) throw DataError("write failure: " + tmp.string());
  }
  fsys::rename(tmp, target);
}

void write_json_atomic(const std::string& path, const json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

// Sibling artifact path: strip the primary's last extension, append suffix.
std::string sibling(const std::string& primary, const std::string& suffix) {
  fsys::path p(primary);
  fsys::path out = p.parent_path() / (p.stem().string() + suffix);
  return out.string();
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw DataError("cannot parse " + what + " entry: '" + tok + "'");
    }
  }
  if (out.empty()) throw DataError(what + " list is empty");
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stoull(tok));
    } catch (const std::exception&) {
      throw DataError("cannot parse seed entry: '" + tok + "'");
    }
  }
  if (out.empty()) throw DataError("seed list is empty");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stoull(tok));
    } catch (const std::exception&) {
      throw DataError("cannot parse size entry: '" + tok + "'");
    }
  }
  return out;
}

FileFormat parse_format(const std::string& s) {
  if (s == "binary") return FileFormat::binary;
  if (s == "csv") return FileFormat::csv;
  throw DataError("unknown format: " + s);
}

std::vector<std::uint32_t> load_label_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open label file: " + path);
  std::vector<std::uint32_t> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      labels.push_back(static_cast<std::uint32_t>(std::stoul(line)));
    } catch (const std::exception&) {
      throw DataError("bad label at " + path + ":" + std::to_string(lineno));
    }
  }
  if (labels.empty()) throw DataError("label file is empty: " + path);
  return labels;
}

std::string labels_to_text(const std::vector<std::uint32_t>& labels) {
  std::string out;
  out.reserve(labels.size() * 4);
  for (std::uint32_t l : labels) {
    out += std::to_string(l);
    out += '\n';
  }
  return out;
}

std::string confusion_to_csv(const Matrix& conf) {
  std::string out;
  for (std::size_t i = 0; i < conf.rows; ++i) {
    for (std::size_t j = 0; j < conf.cols; ++j) {
      if (j) out += ',';
      out += std::to_string(static_cast<long long>(conf(i, j)));
    }
    out += '\n';
  }
  return out;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    auto d = std::chrono::steady_clock::now() - start_;
    return std::chrono::duration<double, std::milli>(d).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Recorded wall-clock values from a manifest; replay reproduces artifacts
// from these instead of re-measuring, so outputs stay byte-identical.
struct ReplayInfo {
  std::vector<double> wall_clock_ms;
  double runtime(std::size_t i, double measured) const {
    return i < wall_clock_ms.size() ? wall_clock_ms[i] : measured;
  }
};

struct ManifestOut {
  std::string command;
  json options;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<std::uint64_t> seeds;
  std::vector<double> wall_clock_ms;
};

void write_manifest(const std::string& path, const ManifestOut& m) {
  json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["command"] = m.command;
  j["options"] = m.options;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["seeds"] = m.seeds;
  j["wall_clock_ms"] = m.wall_clock_ms;
  write_json_atomic(path, j);
}

// ------------------------------------------------------------- shared opts

struct InputOpts {
  std::string input;
  std::string format = "binary";
  bool csv_labels = false;
  std::string normalize = "none";
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(InputOpts, input, format, csv_labels, normalize)

struct TrainOpts {
  std::uint32_t classes = 0;
  double gamma = 10.0;
  double alpha = 1.0;
  std::string prior = "auto";        // uniform | powerlaw | explicit:PATH | auto
  std::string target_mode = "auto";  // softmax | sparsemax | auto
  std::size_t iters = 6000;
  double lr = 1e-3;
  int inner_steps = 10;
  std::size_t batch_size = 0;
  bool no_warm_start = false;
  bool kl_sparse_mean = false;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainOpts, classes, gamma, alpha, prior,
                                                target_mode, iters, lr, inner_steps, batch_size,
                                                no_warm_start, kl_sparse_mean)

FeatureSet load_input(const InputOpts& in) {
  if (!fsys::exists(in.input)) throw DataError("input file does not exist: " + in.input);
  FeatureSet fs = load_features(in.input, parse_format(in.format), in.csv_labels);
  return normalize_rows(fs, parse_normalize_mode(in.normalize));
}

std::uint32_t resolve_classes(const FeatureSet& fs, std::uint32_t flag_classes) {
  if (flag_classes > 0) return flag_classes;
  if (fs.num_classes > 0) return fs.num_classes;
  throw DataError("number of classes unknown: pass --classes or use a labeled input");
}

PriorSpec resolve_prior(const std::string& prior, double alpha, const std::string& method) {
  std::string p = prior;
  if (p == "auto") p = (method == "pet-turtle") ? "powerlaw" : "uniform";
  if (p == "uniform") return PriorSpec::uniform();
  if (p == "powerlaw") return PriorSpec::powerlaw(alpha);
  if (p.rfind("explicit:", 0) == 0) {
    std::string path = p.substr(9);
    std::ifstream is(path);
    if (!is) throw DataError("cannot open prior file: " + path);
    std::vector<double> probs;
    double v;
    while (is >> v) probs.push_back(v);
    if (probs.empty()) throw DataError("prior file is empty: " + path);
    return PriorSpec::explicit_of(probs);
  }
  throw DataError("unknown prior: " + prior);
}

TargetMode resolve_mode(const std::string& mode, const std::string& method) {
  std::string m = mode;
  if (m == "auto") m = (method == "pet-turtle") ? "sparsemax" : "softmax";
  return parse_target_mode(m);
}

TrainConfig make_train_config(const TrainOpts& t, const std::string& method,
                              std::uint64_t seed) {
  TrainConfig cfg;
  cfg.iterations = t.iters;
  cfg.learning_rate = t.lr;
  cfg.inner_steps = t.inner_steps;
  cfg.batch_size = t.batch_size;
  cfg.gamma = t.gamma;
  cfg.prior = resolve_prior(t.prior, t.alpha, method);
  cfg.target_mode = resolve_mode(t.target_mode, method);
  cfg.warm_start = !t.no_warm_start;
  cfg.seed = seed;
  cfg.kl_sparse_mean = t.kl_sparse_mean;
  return cfg;
}

void check_trace_finite(const TrainedModel& model) {
  for (double v : model.loss_trace)
    if (!std::isfinite(v)) throw NumericError("loss trace contains a non-finite value");
}

// ------------------------------------------------------------- gen-blobs

struct GenBlobsOpts {
  std::string output;
  std::string format = "binary";
  std::uint32_t classes = 0;
  std::size_t dim = 0;
  std::string class_sizes;  // comma list; empty: derive from samples/alpha
  std::size_t samples = 0;
  double alpha = 0.0;
  double separation = 0.0;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GenBlobsOpts, output, format, classes, dim,
                                                class_sizes, samples, alpha, separation,
                                                noise_std, seed)

int run_gen_blobs(const GenBlobsOpts& o, const ReplayInfo* replay) {
  Stopwatch sw;
  BlobSpec spec;
  spec.num_classes = o.classes;
  spec.dim = o.dim;
  spec.separation = o.separation;
  spec.noise_std = o.noise_std;
  spec.seed = o.seed;
  if (!o.class_sizes.empty()) {
    spec.class_sizes = parse_size_list(o.class_sizes);
  } else {
    if (o.samples == 0) throw DataError("gen-blobs needs --class-sizes or --samples");
    spec.class_sizes = powerlaw_sizes(o.samples, o.classes, o.alpha);
  }
  FeatureSet fs = gen_gaussian_blobs(spec);
  save_features(fs, o.output, parse_format(o.format));

  ManifestOut m;
  m.command = "gen-blobs";
  m.options = o;
  m.outputs = {o.output};
  m.seeds = {o.seed};
  m.wall_clock_ms = {replay ? replay->runtime(0, sw.ms()) : sw.ms()};
  write_manifest(sibling(o.output, ".manifest.json"), m);
  return 0;
}

// ------------------------------------------------------------- subsample-pl

struct SubsampleOpts {
  InputOpts in;
  std::string output;
  double alpha = 1.0;
  std::uint64_t seed = 0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SubsampleOpts, in, output, alpha, seed)

int run_subsample(const SubsampleOpts& o, const ReplayInfo* replay) {
  Stopwatch sw;
  FeatureSet fs = load_input(o.in);
  FeatureSet sub = subsample_powerlaw(fs, o.alpha, o.seed);
  save_features(sub, o.output, parse_format(o.in.format));

  ManifestOut m;
  m.command = "subsample-pl";
  m.options = o;
  m.inputs = {o.in.input};
  m.outputs = {o.output};
  m.seeds = {o.seed};
  m.wall_clock_ms = {replay ? replay->runtime(0, sw.ms()) : sw.ms()};
  write_manifest(sibling(o.output, ".manifest.json"), m);
  return 0;
}

// ------------------------------------------------------------- cluster

struct ClusterOpts {
  InputOpts in;
  std::string output;
  std::string method = "pet-turtle";  // turtle | pet-turtle | kmeans
  TrainOpts train;
  std::uint64_t seed = 0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ClusterOpts, in, output, method, train, seed)

json metrics_json(const std::string& method, std::uint64_t seed, std::optional<double> gamma,
                  std::optional<double> alpha, std::optional<double> accuracy,
                  const std::string& confusion_csv_path, double runtime_ms) {
  json j;
  j["method"] = method;
  j["seed"] = seed;
  j["gamma"] = gamma ? json(*gamma) : json();
  j["alpha"] = alpha ? json(*alpha) : json();
  j["accuracy"] = accuracy ? json(*accuracy) : json();
  j["confusion_csv_path"] = confusion_csv_path.empty() ? json() : json(confusion_csv_path);
  j["runtime_ms"] = runtime_ms;
  return j;
}

// Runs one clustering method and returns predicted labels.
std::vector<std::uint32_t> run_method(const std::string& method, const FeatureSet& fs,
                                      std::uint32_t c, const TrainOpts& t, std::uint64_t seed,
                                      TrainedModel* model_out) {
  if (method == "kmeans") {
    KMeansResult km = kmeans_pp(fs, c, seed);
    return km.labels;
  }
  if (method != "turtle" && method != "pet-turtle")
    throw DataError("unknown method: " + method);
  TrainConfig cfg = make_train_config(t, method, seed);
  TrainedModel model = train(fs, c, cfg);
  check_trace_finite(model);
  std::vector<std::uint32_t> labels = predict(model.theta, fs);
  if (model_out) *model_out = std::move(model);
  return labels;
}

int run_cluster(const ClusterOpts& o, const ReplayInfo* replay) {
  Stopwatch sw;
  FeatureSet fs = load_input(o.in);
  const std::uint32_t c = resolve_classes(fs, o.train.classes);

  TrainedModel model;
  const bool is_turtle = o.method != "kmeans";
  std::vector<std::uint32_t> labels = run_method(o.method, fs, c, o.train, o.seed,
                                                 is_turtle ? &model : nullptr);
  const double runtime = replay ? replay->runtime(0, sw.ms()) : sw.ms();

  ManifestOut m;
  m.command = "cluster";
  m.options = o;
  m.inputs = {o.in.input};
  m.seeds = {o.seed};
  m.wall_clock_ms = {runtime};

  write_text_atomic(o.output, labels_to_text(labels));
  m.outputs.push_back(o.output);

  if (is_turtle) {
    const std::string trace_path = sibling(o.output, ".trace.csv");
    write_loss_trace_csv(model, trace_path);
    m.outputs.push_back(trace_path);
  }

  std::optional<double> accuracy;
  std::string confusion_path;
  if (fs.has_labels()) {
    auto [acc, matching] = cluster_accuracy(labels, fs.labels, c);
    accuracy = acc;
    Matrix conf = confusion_matrix(labels, fs.labels, matching);
    confusion_path = sibling(o.output, ".confusion.csv");
    write_text_atomic(confusion_path, confusion_to_csv(conf));
    m.outputs.push_back(confusion_path);
  }
  // recorded relative to the metrics file so replays into another
  // directory stay byte-identical
  const std::string confusion_rel =
      confusion_path.empty() ? "" : fsys::path(confusion_path).filename().string();

  const bool powerlaw_prior =
      is_turtle && resolve_prior(o.train.prior, o.train.alpha, o.method).kind ==
                       PriorKind::powerlaw;
  json metrics = metrics_json(
      o.method, o.seed, is_turtle ? std::optional<double>(o.train.gamma) : std::nullopt,
      powerlaw_prior ? std::optional<double>(o.train.alpha) : std::nullopt, accuracy,
      confusion_rel, runtime);
  const std::string metrics_path = sibling(o.output, ".metrics.json");
  write_json_atomic(metrics_path, metrics);
  m.outputs.push_back(metrics_path);

  write_manifest(sibling(o.output, ".manifest.json"), m);
  if (accuracy) std::cout << "accuracy " << *accuracy << "\n";
  return 0;
}

// ------------------------------------------------------------- probe

struct ProbeOpts {
  InputOpts in;
  std::string output;
  std::uint32_t classes = 0;
  double train_fraction = 0.8;
  std::size_t epochs = kProbeEpochs;
  double lr = kProbeEta;
  std::uint64_t seed = 0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ProbeOpts, in, output, classes, train_fraction,
                                                epochs, lr, seed)

int run_probe(const ProbeOpts& o, const ReplayInfo* replay) {
  Stopwatch sw;
  FeatureSet fs = load_input(o.in);
  if (!fs.has_labels()) throw DataError("probe requires a labeled input");
  const std::uint32_t c = resolve_classes(fs, o.classes);
  ProbeResult res = linear_probe(fs, fs.labels, c, o.train_fraction, o.seed, o.epochs, o.lr);
  const double runtime = replay ? replay->runtime(0, sw.ms()) : sw.ms();

  json metrics = metrics_json("linear-probe", o.seed, std::nullopt, std::nullopt,
                              res.val_accuracy, "", runtime);
  write_json_atomic(o.output, metrics);

  ManifestOut m;
  m.command = "probe";
  m.options = o;
  m.inputs = {o.in.input};
  m.outputs = {o.output};
  m.seeds = {o.seed};
  m.wall_clock_ms = {runtime};
  write_manifest(sibling(o.output, ".manifest.json"), m);
  std::cout << "val_accuracy " << res.val_accuracy << "\n";
  return 0;
}

// ------------------------------------------------------------- eval/report

struct EvalOpts {
  InputOpts in;
  std::string pred;
  std::string output;
  std::uint32_t classes = 0;
  bool counts = false;  // report mode: also emit per-class count table
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalOpts, in, pred, output, classes, counts)

int run_eval(const EvalOpts& o, const ReplayInfo* replay, const char* command) {
  Stopwatch sw;
  FeatureSet fs = load_input(o.in);
  if (!fs.has_labels()) throw DataError("evaluation requires a labeled input");
  std::vector<std::uint32_t> pred = load_label_file(o.pred);
  if (pred.size() != fs.n)
    throw DataError("prediction count " + std::to_string(pred.size()) +
                    " does not match N=" + std::to_string(fs.n));
  const std::uint32_t c = resolve_classes(fs, o.classes);

  auto [acc, matching] = cluster_accuracy(pred, fs.labels, c);
  Matrix conf = confusion_matrix(pred, fs.labels, matching);
  const double runtime = replay ? replay->runtime(0, sw.ms()) : sw.ms();

  ManifestOut m;
  m.command = command;
  m.options = o;
  m.inputs = {o.in.input, o.pred};
  m.wall_clock_ms = {runtime};

  const std::string confusion_path = sibling(o.output, ".confusion.csv");
  write_text_atomic(confusion_path, confusion_to_csv(conf));
  m.outputs.push_back(confusion_path);

  if (o.counts) {
    // per matched class: ground-truth count vs predicted-cluster count
    std::string csv = "class,true_count,pred_count\n";
    for (std::uint32_t k = 0; k < c; ++k) {
      long long true_count = 0, pred_count = 0;
      for (std::uint32_t j = 0; j < c; ++j) {
        true_count += static_cast<long long>(conf(j, k));
        pred_count += static_cast<long long>(conf(k, j));
      }
      csv += std::to_string(k) + "," + std::to_string(true_count) + "," +
             std::to_string(pred_count) + "\n";
    }
    const std::string counts_path = sibling(o.output, ".counts.csv");
    write_text_atomic(counts_path, csv);
    m.outputs.push_back(counts_path);
  }

  json metrics = metrics_json("eval", 0, std::nullopt, std::nullopt, acc,
                              fsys::path(confusion_path).filename().string(), runtime);
  write_json_atomic(o.output, metrics);
  m.outputs.push_back(o.output);

  write_manifest(sibling(o.output, ".manifest.json"), m);
  std::cout << "accuracy " << acc << "\n";
  return 0;
}

// ------------------------------------------------------------- cv-grid

struct CvGridOpts {
  InputOpts in;
  std::string output;
  TrainOpts train;
  std::string gamma_grid = "1,5,10,25,50,100,250,500";
  std::string alpha_grid = "0.01,0.05,0.10,0.25,0.50,0.75,1.0,1.25,1.50,1.75,2.0";
  std::size_t folds = 3;
  std::uint64_t seed = 0;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CvGridOpts, in, output, train, gamma_grid,
                                                alpha_grid, folds, seed)

int run_cv_grid(const CvGridOpts& o, const ReplayInfo* replay) {
  Stopwatch sw;
  FeatureSet fs = load_input(o.in);
  const std::uint32_t c = resolve_classes(fs, o.train.classes);
  std::vector<double> gammas = parse_double_list(o.gamma_grid, "gamma grid");
  std::vector<double> alphas = parse_double_list(o.alpha_grid, "alpha grid");

  TrainConfig base = make_train_config(o.train, "pet-turtle", o.seed);
  GridResult grid = grid_search(fs, c, gammas, alphas, base, o.folds, o.seed);
  const double runtime = replay ? replay->runtime(0, sw.ms()) : sw.ms();

  write_grid_csv(grid, o.output);

  json jgrid;
  jgrid["cells"] = json::array();
  for (const GridCell& cell : grid.table) {
    json jc;
    jc["gamma"] = cell.gamma;
    jc["alpha"] = cell.alpha;
    jc["mean_val_error"] = cell.mean_val_error;
    jc["std_val_error"] = cell.std_val_error;
    jc["ok"] = cell.ok;
    if (!cell.ok) jc["error"] = cell.error;
    jgrid["cells"].push_back(jc);
  }
  jgrid["best"] = {{"gamma", grid.best().gamma}, {"alpha", grid.best().alpha}};
  jgrid["runtime_ms"] = runtime;
  const std::string json_path = sibling(o.output, ".grid.json");
  write_json_atomic(json_path, jgrid);

  ManifestOut m;
  m.command = "cv-grid";
  m.options = o;
  m.inputs = {o.in.input};
  m.outputs = {o.output, json_path};
  m.seeds = {o.seed};
  m.wall_clock_ms = {runtime};
  write_manifest(sibling(o.output, ".manifest.json"), m);
  std::cout << "best gamma " << grid.best().gamma << " alpha " << grid.best().alpha << "\n";
  return 0;
}

// ------------------------------------------------------------- trials

struct TrialsOpts {
  InputOpts in;
  std::string output;
  std::vector<std::string> methods;
  std::string seeds = "0,1,2,3,4,5,6,7,8,9";
  TrainOpts train;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrialsOpts, in, output, methods, seeds, train)

int run_trials(const TrialsOpts& o, const ReplayInfo* replay) {
  FeatureSet fs = load_input(o.in);
  if (!fs.has_labels()) throw DataError("trials requires a labeled input for matched accuracy");
  const std::uint32_t c = resolve_classes(fs, o.train.classes);
  if (o.methods.empty() || o.methods.size() > 2)
    throw DataError("trials takes one or two --method values");
  std::vector<std::uint64_t> seeds = parse_seed_list(o.seeds);

  struct Row {
    std::string method;
    std::uint64_t seed;
    double accuracy;
    double runtime_ms;
    bool ok;
    std::string error;
  };
  std::vector<Row> rows(o.methods.size() * seeds.size());

  const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(dynamic) if (total > 1)
  for (std::ptrdiff_t r = 0; r < total; ++r) {
    const std::size_t mi = static_cast<std::size_t>(r) / seeds.size();
    const std::size_t si = static_cast<std::size_t>(r) % seeds.size();
    Stopwatch sw;
    Row& row = rows[r];
    row.method = o.methods[mi];
    row.seed = seeds[si];
    try {
      std::vector<std::uint32_t> labels =
          run_method(o.methods[mi], fs, c, o.train, seeds[si], nullptr);
      auto [acc, matching] = cluster_accuracy(labels, fs.labels, c);
      row.accuracy = acc;
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    row.runtime_ms = sw.ms();
  }
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (replay) rows[r].runtime_ms = replay->runtime(r, rows[r].runtime_ms);

  // a failed trial aborts, but the completed rows are written out first
  std::size_t failed = 0;
  for (const Row& row : rows)
    if (!row.ok) ++failed;
  if (failed > 0) {
    std::string csv = "method,seed,accuracy,runtime_ms\n";
    char rb[160];
    for (const Row& row : rows) {
      if (!row.ok) continue;
      std::snprintf(rb, sizeof(rb), "%s,%llu,%.17g,%.17g\n", row.method.c_str(),
                    static_cast<unsigned long long>(row.seed), row.accuracy, row.runtime_ms);
      csv += rb;
    }
    write_text_atomic(sibling(o.output, ".per_seed.csv"), csv);
    throw DataError(std::to_string(failed) + " of " + std::to_string(rows.size()) +
                    " trials failed, first error: " +
                    std::find_if(rows.begin(), rows.end(), [](const Row& r) { return !r.ok; })
                        ->error);
  }

  json summary;
  summary["methods"] = o.methods;
  summary["seeds"] = seeds;
  summary["per_seed"] = json::array();
  for (const Row& row : rows)
    summary["per_seed"].push_back({{"method", row.method},
                                   {"seed", row.seed},
                                   {"accuracy", row.accuracy},
                                   {"runtime_ms", row.runtime_ms}});
  summary["summary"] = json::array();
  for (std::size_t mi = 0; mi < o.methods.size(); ++mi) {
    std::vector<double> accs;
    for (std::size_t si = 0; si < seeds.size(); ++si)
      accs.push_back(rows[mi * seeds.size() + si].accuracy);
    auto [mean, stddev] = mean_stddev(accs);
    summary["summary"].push_back({{"method", o.methods[mi]},
                                  {"mean_accuracy", mean},
                                  {"std_accuracy", stddev}});
  }
  if (o.methods.size() == 2) {
    // paired per-seed deltas, second method minus first
    std::vector<double> deltas;
    for (std::size_t si = 0; si < seeds.size(); ++si)
      deltas.push_back(rows[seeds.size() + si].accuracy - rows[si].accuracy);
    auto [mean, stddev] = mean_stddev(deltas);
    summary["paired_delta"] = {{"method_a", o.methods[0]},
                               {"method_b", o.methods[1]},
                               {"deltas", deltas},
                               {"mean_delta", mean},
                               {"std_delta", stddev}};
  }
  write_json_atomic(o.output, summary);

  std::string csv = "method,seed,accuracy,runtime_ms\n";
  char buf[160];
  for (const Row& row : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%llu,%.17g,%.17g\n", row.method.c_str(),
                  static_cast<unsigned long long>(row.seed), row.accuracy, row.runtime_ms);
    csv += buf;
  }
  const std::string csv_path = sibling(o.output, ".per_seed.csv");
  write_text_atomic(csv_path, csv);

  ManifestOut m;
  m.command = "trials";
  m.options = o;
  m.inputs = {o.in.input};
  m.outputs = {o.output, csv_path};
  m.seeds = seeds;
  for (const Row& row : rows) m.wall_clock_ms.push_back(row.runtime_ms);
  write_manifest(sibling(o.output, ".manifest.json"), m);

  for (const auto& s : summary["summary"])
    std::cout << s["method"].get<std::string>() << " mean_accuracy "
              << s["mean_accuracy"].get<double>() << " +- " << s["std_accuracy"].get<double>()
              << "\n";
  return 0;
}

// ------------------------------------------------------------- replay

int dispatch_options(const std::string& command, const json& options, const ReplayInfo* replay);

struct ReplayOpts {
  std::string manifest;
  std::string output_dir;
};

std::string reroot(const std::string& path, const std::string& dir) {
  if (dir.empty()) return path;
  return (fsys::path(dir) / fsys::path(path).filename()).string();
}

int run_replay(const ReplayOpts& o) {
  std::ifstream is(o.manifest);
  if (!is) throw DataError("cannot open manifest: " + o.manifest);
  json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw DataError("cannot parse manifest " + o.manifest + ": " + e.what());
  }
  if (!j.contains("command") || !j.contains("options"))
    throw DataError("manifest lacks command/options: " + o.manifest);

  ReplayInfo info;
  if (j.contains("wall_clock_ms")) info.wall_clock_ms = j["wall_clock_ms"].get<std::vector<double>>();

  json options = j["options"];
  if (!o.output_dir.empty() && options.contains("output"))
    options["output"] = reroot(options["output"].get<std::string>(), o.output_dir);

  return dispatch_options(j["command"].get<std::string>(), options, &info);
}

int dispatch_options(const std::string& command, const json& options, const ReplayInfo* replay) {
  if (command == "gen-blobs") return run_gen_blobs(options.get<GenBlobsOpts>(), replay);
  if (command == "subsample-pl") return run_subsample(options.get<SubsampleOpts>(), replay);
  if (command == "cluster") return run_cluster(options.get<ClusterOpts>(), replay);
  if (command == "probe") return run_probe(options.get<ProbeOpts>(), replay);
  if (command == "eval") return run_eval(options.get<EvalOpts>(), replay, "eval");
  if (command == "report") return run_eval(options.get<EvalOpts>(), replay, "report");
  if (command == "cv-grid") return run_cv_grid(options.get<CvGridOpts>(), replay);
  if (command == "trials") return run_trials(options.get<TrialsOpts>(), replay);
  throw DataError("manifest names an unknown command: " + command);
}

// ------------------------------------------------------------- CLI wiring

void add_input_flags(CLI::App* cmd, InputOpts& in, bool required = true) {
  auto* opt = cmd->add_option("--input", in.input, "input feature file");
  if (required) opt->required();
  cmd->add_option("--format", in.format, "feature file format")
      ->check(CLI::IsMember({"binary", "csv"}));
  cmd->add_flag("--csv-labels", in.csv_labels, "csv input carries a trailing label column");
  cmd->add_option("--normalize", in.normalize, "row/column normalization")
      ->check(CLI::IsMember({"none", "l2", "standardize"}));
}

void add_train_flags(CLI::App* cmd, TrainOpts& t) {
  cmd->add_option("--classes", t.classes, "number of clusters C");
  cmd->add_option("--gamma", t.gamma, "regularizer weight");
  cmd->add_option("--alpha", t.alpha, "power-law decay for the prior");
  cmd->add_option("--prior", t.prior, "uniform | powerlaw | explicit:PATH");
  cmd->add_option("--target-mode", t.target_mode, "softmax | sparsemax")
      ->check(CLI::IsMember({"softmax", "sparsemax", "auto"}));
  cmd->add_option("--iters", t.iters, "outer iterations T");
  cmd->add_option("--lr", t.lr, "learning rate eta");
  cmd->add_option("--inner-steps", t.inner_steps, "hyperplane steps M per iteration");
  cmd->add_option("--batch-size", t.batch_size, "mini-batch size (0: min(N,1024))");
  cmd->add_flag("--no-warm-start", t.no_warm_start, "redraw w0 every iteration");
  cmd->add_flag("--kl-sparse-mean", t.kl_sparse_mean,
                "use sparsemax rows for the label-distribution mean (ablation)");
}

int dispatch_impl(const std::vector<std::string>& args) {
  CLI::App app{"unsupervised max-margin clustering with power-law priors"};
  app.set_version_flag("--version", kToolVersion);
  app.set_config("--config", "",
                 "TOML-style config file with one [section] per subcommand; flags win");
  app.require_subcommand(1);

  GenBlobsOpts gen;
  auto* cmd_gen = app.add_subcommand("gen-blobs", "generate labeled Gaussian blobs");
  cmd_gen->add_option("--output", gen.output, "output feature file")->required();
  cmd_gen->add_option("--format", gen.format, "output format")
      ->check(CLI::IsMember({"binary", "csv"}));
  cmd_gen->add_option("--classes", gen.classes, "number of classes")->required();
  cmd_gen->add_option("--dim", gen.dim, "feature dimension")->required();
  cmd_gen->add_option("--class-sizes", gen.class_sizes, "comma list of per-class counts");
  cmd_gen->add_option("--samples", gen.samples, "total samples (sizes from --alpha)");
  cmd_gen->add_option("--alpha", gen.alpha, "power-law decay for derived sizes");
  cmd_gen->add_option("--separation", gen.separation, "centroid distance in noise units");
  cmd_gen->add_option("--noise-std", gen.noise_std, "per-class noise stddev");
  cmd_gen->add_option("--seed", gen.seed, "rng seed");

  SubsampleOpts sub;
  auto* cmd_sub = app.add_subcommand("subsample-pl", "power-law imbalanced subsample");
  add_input_flags(cmd_sub, sub.in);
  cmd_sub->add_option("--output", sub.output, "output feature file")->required();
  cmd_sub->add_option("--alpha", sub.alpha, "power-law decay");
  cmd_sub->add_option("--seed", sub.seed, "rng seed");

  ClusterOpts cluster;
  auto* cmd_cluster = app.add_subcommand("cluster", "cluster a feature file");
  add_input_flags(cmd_cluster, cluster.in);
  cmd_cluster->add_option("--output", cluster.output, "labels output path")->required();
  cmd_cluster->add_option("--method", cluster.method, "turtle | pet-turtle | kmeans")
      ->check(CLI::IsMember({"turtle", "pet-turtle", "kmeans"}));
  cmd_cluster->add_option("--seed", cluster.seed, "rng seed");
  add_train_flags(cmd_cluster, cluster.train);

  ProbeOpts probe;
  auto* cmd_probe = app.add_subcommand("probe", "supervised linear probe");
  add_input_flags(cmd_probe, probe.in);
  cmd_probe->add_option("--output", probe.output, "metrics output path")->required();
  cmd_probe->add_option("--classes", probe.classes, "number of classes");
  cmd_probe->add_option("--train-fraction", probe.train_fraction, "training split fraction");
  cmd_probe->add_option("--epochs", probe.epochs, "gradient descent epochs");
  cmd_probe->add_option("--lr", probe.lr, "learning rate");
  cmd_probe->add_option("--seed", probe.seed, "rng seed");

  EvalOpts eval;
  auto* cmd_eval = app.add_subcommand("eval", "score predictions against ground truth");
  add_input_flags(cmd_eval, eval.in);
  cmd_eval->add_option("--pred", eval.pred, "predicted labels file")->required();
  cmd_eval->add_option("--output", eval.output, "metrics output path")->required();
  cmd_eval->add_option("--classes", eval.classes, "number of classes");

  EvalOpts report;
  report.counts = true;
  auto* cmd_report = app.add_subcommand("report", "evaluation report with count tables");
  add_input_flags(cmd_report, report.in);
  cmd_report->add_option("--pred", report.pred, "predicted labels file")->required();
  cmd_report->add_option("--output", report.output, "metrics output path")->required();
  cmd_report->add_option("--classes", report.classes, "number of classes");

  CvGridOpts grid;
  auto* cmd_grid = app.add_subcommand("cv-grid", "cross-validated (gamma, alpha) search");
  add_input_flags(cmd_grid, grid.in);
  cmd_grid->add_option("--output", grid.output, "grid csv output path")->required();
  cmd_grid->add_option("--gamma-grid", grid.gamma_grid, "comma list of gamma values");
  cmd_grid->add_option("--alpha-grid", grid.alpha_grid, "comma list of alpha values");
  cmd_grid->add_option("--folds", grid.folds, "cross-validation folds");
  cmd_grid->add_option("--seed", grid.seed, "master seed");
  add_train_flags(cmd_grid, grid.train);

  TrialsOpts trials;
  auto* cmd_trials = app.add_subcommand("trials", "multi-seed accuracy protocol");
  add_input_flags(cmd_trials, trials.in);
  cmd_trials->add_option("--output", trials.output, "summary json output path")->required();
  cmd_trials->add_option("--method", trials.methods, "method, may repeat (max 2)")
      ->required()
      ->expected(1, 2);
  cmd_trials->add_option("--seeds", trials.seeds, "comma list of seeds");
  add_train_flags(cmd_trials, trials.train);

  ReplayOpts replay;
  auto* cmd_replay = app.add_subcommand("replay", "re-run a command from its manifest");
  cmd_replay->add_option("--manifest", replay.manifest, "manifest path")->required();
  cmd_replay->add_option("--output-dir", replay.output_dir, "redirect outputs to a directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors exit 1, --help/--version exit 0
  }

  if (cmd_gen->parsed()) return run_gen_blobs(gen, nullptr);
  if (cmd_sub->parsed()) return run_subsample(sub, nullptr);
  if (cmd_cluster->parsed()) return run_cluster(cluster, nullptr);
  if (cmd_probe->parsed()) return run_probe(probe, nullptr);
  if (cmd_eval->parsed()) return run_eval(eval, nullptr, "eval");
  if (cmd_report->parsed()) return run_eval(report, nullptr, "report");
  if (cmd_grid->parsed()) return run_cv_grid(grid, nullptr);
  if (cmd_trials->parsed()) return run_trials(trials, nullptr);
  if (cmd_replay->parsed()) return run_replay(replay);
  return 1;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
#ifdef _OPENMP
  if (const char* env = std::getenv("TURTLE_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1) omp_set_num_threads(std::min(cap, omp_get_max_threads()));
  }
#endif
  try {
    return dispatch_impl(args);
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args);
}

}  // namespace turtle::cli
