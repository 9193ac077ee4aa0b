#pragma once

// Sample-size sweeps over (model, n, seed) cells, aggregation, and the CSV,
// SVG and config file formats.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rfattn/errors.hpp"
#include "rfattn/features.hpp"
#include "rfattn/geometry.hpp"
#include "rfattn/learner.hpp"
#include "rfattn/parallel.hpp"
#include "rfattn/rng.hpp"
#include "rfattn/targets.hpp"
#include "rfattn/text.hpp"

namespace rfattn {

struct ExperimentConfig {
  int d = 16;
  int N = 16;
  int M = 1000;
  std::optional<int> M_rfmlp;
  bool match_params = true;
  double bias_scale = 4.0;
  std::vector<int> n_list = {16, 32, 64, 128, 256, 512, 1024, 2048, 4096};
  int n_test = 1000;
  int seeds = 5;
  std::uint64_t seed = 0;
  std::vector<ModelKind> models = {ModelKind::kRFA, ModelKind::kBRFA, ModelKind::kRFMLP};
  std::vector<double> lambda_grid = default_lambda_grid();
  std::map<std::string, std::string> target_block = {{"kind", "f1"}, {"p", "2"}, {"beta_seed", "1"}};
  std::string output_csv = "sweep.csv";
  std::string output_plot = "sweep.svg";
  unsigned threads = 0;
  bool record_wall_time = true;
  bool force = false;

  /// Width of RFMLP: M(d+1) under parameter matching.
  [[nodiscard]] int rfmlp_width() const {
    if (match_params || !M_rfmlp) return M * (d + 1);
    return *M_rfmlp;
  }

  [[nodiscard]] int width(ModelKind kind) const { return kind == ModelKind::kRFMLP ? rfmlp_width() : M; }

  [[nodiscard]] TargetSpec target() const {
    auto it = target_block.find("d");
    if (it != target_block.end() && parse_int<int>(it->second, "target d") != d) {
      throw InvalidConfig("target d differs from experiment d");
    }
    return TargetSpec::from_block(target_block, d);
  }

  void validate() const {
    if (d < 1) throw InvalidDimension("d must be >= 1");
    if (N < 1) throw InvalidDimension("N must be >= 1");
    if (M < 1) throw InvalidConfig("M must be >= 1");
    if (M_rfmlp && *M_rfmlp < 1) throw InvalidConfig("M_rfmlp must be >= 1");
    if (match_params && M_rfmlp && *M_rfmlp != M * (d + 1)) {
      throw InvalidConfig("M_rfmlp = " + std::to_string(*M_rfmlp) + " conflicts with match_params (M(d+1) = " +
                          std::to_string(M * (d + 1)) + ")");
    }
    if (!(bias_scale >= 0.0) || !std::isfinite(bias_scale)) throw InvalidConfig("bias_scale must be finite and >= 0");
    if (n_list.empty()) throw InvalidConfig("n_list is empty");
    for (int n : n_list) {
      if (n < 2) throw InvalidConfig("every n must be >= 2");
    }
    if (n_test < 2) throw InvalidConfig("n_test must be >= 2");
    if (seeds < 1) throw InvalidConfig("seeds must be >= 1");
    if (models.empty()) throw InvalidConfig("no models selected");
    if (lambda_grid.empty()) throw InvalidConfig("lambda_grid is empty");
    for (double l : lambda_grid) {
      if (!(l >= 0.0) || !std::isfinite(l)) throw InvalidConfig("lambda values must be finite and >= 0");
    }
    (void)target();
  }
};

namespace detail {

inline bool parse_bool(std::string_view v, std::string_view key) {
  const auto s = trim(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw InvalidConfig("'" + std::string(key) + "' expects true or false, got '" + std::string(v) + "'");
}

inline std::string models_text(const std::vector<ModelKind>& models) {
  std::string out;
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (i) out += ',';
    std::string m(to_string(models[i]));
    std::transform(m.begin(), m.end(), m.begin(), [](unsigned char c) { return std::tolower(c); });
    out += m;
  }
  return out;
}

}  // namespace detail

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "d",       "N",           "M",      "M_rfmlp",     "match_params", "bias_scale",
      "n_list",  "n_test",      "seeds",  "seed",        "models",       "lambda_grid",
      "output_csv", "output_plot", "threads", "record_wall_time", "force"};
  return keys;
}

/// Sets one top-level key from its textual value; unknown keys are rejected.
inline void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  const std::string k(trim(key));
  if (k == "d") cfg.d = parse_int<int>(value, k);
  else if (k == "N") cfg.N = parse_int<int>(value, k);
  else if (k == "M") cfg.M = parse_int<int>(value, k);
  else if (k == "M_rfmlp") cfg.M_rfmlp = parse_int<int>(value, k);
  else if (k == "match_params") cfg.match_params = detail::parse_bool(value, k);
  else if (k == "bias_scale") cfg.bias_scale = parse_double(value, k);
  else if (k == "n_list") {
    cfg.n_list.clear();
    for (auto item : split(value, ',')) cfg.n_list.push_back(parse_int<int>(item, k));
  } else if (k == "n_test") cfg.n_test = parse_int<int>(value, k);
  else if (k == "seeds") cfg.seeds = parse_int<int>(value, k);
  else if (k == "seed") cfg.seed = parse_int<std::uint64_t>(value, k);
  else if (k == "models") {
    cfg.models.clear();
    for (auto item : split(value, ',')) cfg.models.push_back(parse_model_kind(item));
  } else if (k == "lambda_grid") {
    cfg.lambda_grid = trim(value) == "default" ? default_lambda_grid() : parse_double_list(value, k);
  } else if (k == "output_csv") cfg.output_csv = std::string(trim(value));
  else if (k == "output_plot") cfg.output_plot = std::string(trim(value));
  else if (k == "threads") cfg.threads = parse_int<unsigned>(value, k);
  else if (k == "record_wall_time") cfg.record_wall_time = detail::parse_bool(value, k);
  else if (k == "force") cfg.force = detail::parse_bool(value, k);
  else throw InvalidConfig("unknown config key '" + k + "'");
}

/// Parses `key = value` lines with an optional [target] section. '#' starts a comment.
inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::map<std::string, std::string> target;
  bool in_target = false;
  bool saw_target = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line != "[target]") throw InvalidConfig(where + "unknown section " + std::string(line));
      if (saw_target) throw InvalidConfig(where + "duplicate [target] section");
      in_target = saw_target = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw InvalidConfig(where + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    try {
      if (in_target) {
        if (!target.emplace(key, value).second) throw InvalidConfig("duplicate target key '" + key + "'");
      } else {
        set_config_value(cfg, key, value);
      }
    } catch (const InvalidConfig& e) {
      throw InvalidConfig(where + e.what());
    }
  }
  if (saw_target) cfg.target_block = std::move(target);
  cfg.validate();
  return cfg;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidConfig("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path)); }

inline std::string to_config_text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  std::string n_list;
  for (std::size_t i = 0; i < cfg.n_list.size(); ++i) n_list += (i ? "," : "") + std::to_string(cfg.n_list[i]);
  out << "d = " << cfg.d << "\nN = " << cfg.N << "\nM = " << cfg.M << "\n";
  if (cfg.M_rfmlp) out << "M_rfmlp = " << *cfg.M_rfmlp << "\n";
  out << "match_params = " << (cfg.match_params ? "true" : "false") << "\n"
      << "bias_scale = " << format_double(cfg.bias_scale) << "\n"
      << "n_list = " << n_list << "\n"
      << "n_test = " << cfg.n_test << "\nseeds = " << cfg.seeds << "\nseed = " << cfg.seed << "\n"
      << "models = " << detail::models_text(cfg.models) << "\n"
      << "lambda_grid = " << join_doubles(cfg.lambda_grid) << "\n"
      << "output_csv = " << cfg.output_csv << "\noutput_plot = " << cfg.output_plot << "\n"
      << "threads = " << cfg.threads << "\n"
      << "record_wall_time = " << (cfg.record_wall_time ? "true" : "false") << "\n"
      << "force = " << (cfg.force ? "true" : "false") << "\n\n[target]\n";
  for (const auto& [k, v] : cfg.target_block) out << k << " = " << v << "\n";
  return out.str();
}

/// d = N = 8, M = 200, n = 2^4..2^10, 3 seeds.
inline ExperimentConfig desk_preset() {
  ExperimentConfig cfg;
  cfg.d = 8;
  cfg.N = 8;
  cfg.M = 200;
  cfg.n_list = {16, 32, 64, 128, 256, 512, 1024};
  cfg.seeds = 3;
  return cfg;
}

/// d = N = 16, M = 1000, n = 2^4..2^12, 5 seeds.
inline ExperimentConfig paper_preset() { return ExperimentConfig{}; }

// ---------------------------------------------------------------------------
// Sweep

struct SweepRow {
  ModelKind model = ModelKind::kRFA;
  std::string target;
  int n = 0;
  int seed = 0;
  double lambda = std::nan("");
  double train_mse = std::nan("");
  double test_mse = std::nan("");
  double k1_hat = std::nan("");
  double k2_hat = std::nan("");
  double wall_time_s = 0.0;
  bool failed = false;
  std::string error;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

/// Stream layout: everything hangs off RngStream(cfg.seed) keyed by seed
/// index, so a cell's inputs do not depend on which other cells run.
struct SweepStreams {
  static RngStream seed_root(const ExperimentConfig& cfg, int seed_index) {
    return RngStream(cfg.seed).derive(StreamTag::kSeedIndex, static_cast<std::uint64_t>(seed_index));
  }
  /// Shared by all models of a seed, so attention models see the same W_m.
  static RngStream weights(const ExperimentConfig& cfg, int seed_index) {
    return seed_root(cfg, seed_index).derive(StreamTag::kWeights, 0);
  }
  static RngStream train(const ExperimentConfig& cfg, int seed_index, int n) {
    return seed_root(cfg, seed_index).derive(StreamTag::kTrainData, static_cast<std::uint64_t>(n));
  }
  static RngStream test(const ExperimentConfig& cfg, int seed_index) {
    return seed_root(cfg, seed_index).derive(StreamTag::kTestData, 0);
  }
};

inline Dataset make_dataset(const TargetSpec& target, RngStream& stream, int count, int d, int keys) {
  Dataset ds;
  ds.inputs = sample_batch(stream, count, d, keys);
  ds.labels.resize(count);
  for (int j = 0; j < count; ++j) ds.labels(j) = target(ds.inputs[static_cast<std::size_t>(j)]);
  return ds;
}

/// Runs one (model, n, seed) cell. `test` is the seed's test set with raw labels.
inline SweepRow run_cell(const ExperimentConfig& cfg, const TargetSpec& target, ModelKind model, int n, int seed_index,
                         const Dataset& test, unsigned threads = 1, FitResult* fit_out = nullptr) {
  SweepRow row;
  row.model = model;
  row.target = target.id();
  row.n = n;
  row.seed = seed_index;
  const auto start = std::chrono::steady_clock::now();
  try {
    RngStream ws = SweepStreams::weights(cfg, seed_index);
    const double bias = model == ModelKind::kBRFA ? cfg.bias_scale : 0.0;
    const HeadWeights weights = sample_weights(ws, model, cfg.width(model), cfg.d, cfg.N, bias);
    RngStream ts = SweepStreams::train(cfg, seed_index, n);
    const Dataset train = make_dataset(target, ts, n, cfg.d, cfg.N);
    const Standardized st = standardize(train.labels);
    const Eigen::VectorXd y_test = st.apply(test.labels);
    const FeatureMatrix f_train = featurize(weights, train.inputs, threads);
    const FeatureMatrix f_test = featurize(weights, test.inputs, threads);
    FitResult fit = select_lambda(f_train, st.values, f_test, y_test, cfg.lambda_grid, threads);
    row.lambda = fit.lambda;
    row.train_mse = fit.train_error;
    row.test_mse = fit.test_error;
    row.k1_hat = fit.k1_hat;
    row.k2_hat = fit.k2_hat;
    if (fit_out) *fit_out = std::move(fit);
  } catch (const std::exception& e) {
    row.failed = true;
    row.error = e.what();
  }
  if (cfg.record_wall_time) {
    row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return row;
}

inline Dataset make_test_set(const ExperimentConfig& cfg, const TargetSpec& target, int seed_index) {
  RngStream s = SweepStreams::test(cfg, seed_index);
  return make_dataset(target, s, cfg.n_test, cfg.d, cfg.N);
}

/// All cells of the config, rows ordered by (model, n, seed). Cells run
/// concurrently when cfg.threads != 1; the output does not depend on it.
inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const TargetSpec target = cfg.target();

  std::vector<ModelKind> models = cfg.models;
  std::sort(models.begin(), models.end());
  models.erase(std::unique(models.begin(), models.end()), models.end());
  std::vector<int> ns = cfg.n_list;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());

  std::vector<Dataset> tests(static_cast<std::size_t>(cfg.seeds));
  parallel_for(tests.size(), cfg.threads, [&](std::size_t s) { tests[s] = make_test_set(cfg, target, static_cast<int>(s)); });

  struct Cell {
    ModelKind model;
    int n;
    int seed;
  };
  std::vector<Cell> cells;
  for (ModelKind m : models) {
    for (int n : ns) {
      for (int s = 0; s < cfg.seeds; ++s) cells.push_back({m, n, s});
    }
  }
  // Larger cells first so the tail of the schedule is short; rows are
  // written to their own slots, so order of execution is irrelevant.
  std::vector<std::size_t> order(cells.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cells[a].n > cells[b].n; });

  SweepResult out;
  out.rows.resize(cells.size());
  parallel_for(order.size(), cfg.threads, [&](std::size_t i) {
    const Cell& c = cells[order[i]];
    out.rows[order[i]] = run_cell(cfg, target, c.model, c.n, c.seed, tests[static_cast<std::size_t>(c.seed)], 1);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation

struct AggregateRow {
  ModelKind model = ModelKind::kRFA;
  std::string target;
  int n = 0;
  int count = 0;   ///< successful seeds
  int failed = 0;  ///< failed seeds
  double mean = std::nan("");
  double stderr_ = 0.0;
  bool single_seed = false;
};

/// Mean and sample-std / sqrt(count) of test_mse per (model, target, n); failed rows are excluded.
inline std::vector<AggregateRow> aggregate(const SweepResult& result) {
  if (result.rows.empty()) throw InvalidConfig("cannot aggregate an empty sweep");
  std::map<std::tuple<ModelKind, std::string, int>, std::vector<const SweepRow*>> groups;
  for (const auto& r : result.rows) groups[{r.model, r.target, r.n}].push_back(&r);
  std::vector<AggregateRow> out;
  for (const auto& [key, rows] : groups) {
    AggregateRow a;
    a.model = std::get<0>(key);
    a.target = std::get<1>(key);
    a.n = std::get<2>(key);
    std::vector<double> v;
    for (const auto* r : rows) {
      if (r->failed || !std::isfinite(r->test_mse)) ++a.failed;
      else v.push_back(r->test_mse);
    }
    a.count = static_cast<int>(v.size());
    if (!v.empty()) {
      a.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - a.mean) * (x - a.mean);
        a.stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
      }
    }
    a.single_seed = a.count <= 1;
    out.push_back(std::move(a));
  }
  return out;
}

/// Aggregate cell for (model, n), or nullptr.
inline const AggregateRow* find_aggregate(const std::vector<AggregateRow>& agg, ModelKind model, int n) {
  for (const auto& a : agg) {
    if (a.model == model && a.n == n) return &a;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Files

inline constexpr const char* kCsvHeader = "model,target,n,seed,lambda,train_mse,test_mse,k1_hat,k2_hat,wall_time_s";

/// Writes `content`, creating parent directories. Refuses to replace an
/// existing file unless `force`.
inline void write_text_file(const std::filesystem::path& path, const std::string& content, bool force) {
  namespace fs = std::filesystem;
  if (path.empty()) throw Error("empty output path");
  if (fs::exists(path) && !force) {
    throw OutputExists("refusing to overwrite existing file '" + path.string() + "' (use --force)");
  }
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << content;
  out.close();
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline std::string to_csv(const SweepResult& result) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : result.rows) {
    out += std::string(to_string(r.model)) + "," + r.target + "," + std::to_string(r.n) + "," + std::to_string(r.seed) +
           "," + format_double(r.lambda) + "," + format_double(r.train_mse) + "," + format_double(r.test_mse) + "," +
           format_double(r.k1_hat) + "," + format_double(r.k2_hat) + "," + format_double(r.wall_time_s) + "\n";
  }
  return out;
}

inline SweepResult parse_csv(std::string_view text) {
  SweepResult result;
  std::size_t pos = 0;
  bool header = true;
  int line_no = 0;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (header) {
      if (line != kCsvHeader) throw InvalidConfig("unexpected CSV header: " + std::string(line));
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 10) throw InvalidConfig("CSV line " + std::to_string(line_no) + " has " + std::to_string(f.size()) + " fields");
    SweepRow r;
    r.model = parse_model_kind(f[0]);
    r.target = std::string(f[1]);
    r.n = parse_int<int>(f[2], "n");
    r.seed = parse_int<int>(f[3], "seed");
    r.lambda = parse_double(f[4], "lambda");
    r.train_mse = parse_double(f[5], "train_mse");
    r.test_mse = parse_double(f[6], "test_mse");
    r.k1_hat = parse_double(f[7], "k1_hat");
    r.k2_hat = parse_double(f[8], "k2_hat");
    r.wall_time_s = parse_double(f[9], "wall_time_s");
    r.failed = std::isnan(r.test_mse);
    result.rows.push_back(std::move(r));
  }
  if (header) throw InvalidConfig("CSV is empty");
  return result;
}

inline void emit_csv(const SweepResult& result, const std::filesystem::path& path, bool force) {
  write_text_file(path, to_csv(result), force);
}

/// Log-log learning curves: log2 n on x, log10 test MSE on y, one series per
/// model with +-1 stderr bars.
inline std::string render_svg(const std::vector<AggregateRow>& agg, const std::string& title) {
  constexpr double kW = 640, kH = 440, kL = 70, kR = 130, kT = 40, kB = 55;
  std::vector<const AggregateRow*> pts;
  for (const auto& a : agg) {
    if (std::isfinite(a.mean) && a.mean > 0.0) pts.push_back(&a);
  }
  double xmin = 4, xmax = 12, ymin = -3, ymax = 0.5;
  if (!pts.empty()) {
    xmin = xmax = std::log2(pts[0]->n);
    ymin = ymax = std::log10(pts[0]->mean);
    for (const auto* a : pts) {
      const double lo = a->mean - a->stderr_ > 0.0 ? a->mean - a->stderr_ : a->mean;
      xmin = std::min(xmin, std::log2(a->n));
      xmax = std::max(xmax, std::log2(a->n));
      ymin = std::min(ymin, std::log10(lo));
      ymax = std::max(ymax, std::log10(a->mean + a->stderr_));
    }
  }
  xmin = std::floor(xmin);
  xmax = std::max(std::ceil(xmax), xmin + 1);
  ymin = std::floor(ymin);
  ymax = std::max(std::ceil(ymax), ymin + 1);
  auto px = [&](double lx) { return kL + (lx - xmin) / (xmax - xmin) * (kW - kL - kR); };
  auto py = [&](double ly) { return kT + (ymax - ly) / (ymax - ymin) * (kH - kT - kB); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW
    << " " << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << num((kW - kR + kL) / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title
    << "</text>\n";
  s << "<g stroke=\"black\" fill=\"none\"><rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << kW - kL - kR
    << "\" height=\"" << kH - kT - kB << "\"/></g>\n";
  for (int k = static_cast<int>(xmin); k <= static_cast<int>(xmax); ++k) {
    const double x = px(k);
    s << "<line x1=\"" << num(x) << "\" y1=\"" << kH - kB << "\" x2=\"" << num(x) << "\" y2=\"" << kH - kB + 5
      << "\" stroke=\"black\"/><text x=\"" << num(x) << "\" y=\"" << kH - kB + 18 << "\" text-anchor=\"middle\">2^" << k
      << "</text>\n";
  }
  for (int k = static_cast<int>(ymin); k <= static_cast<int>(ymax); ++k) {
    const double y = py(k);
    s << "<line x1=\"" << kL - 5 << "\" y1=\"" << num(y) << "\" x2=\"" << kL << "\" y2=\"" << num(y)
      << "\" stroke=\"black\"/><text x=\"" << kL - 8 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">1e" << k
      << "</text>\n";
  }
  s << "<text x=\"" << num((kW - kR + kL) / 2) << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">n (log2)</text>\n";
  s << "<text transform=\"translate(18," << num((kH - kB + kT) / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">test MSE (log10)</text>\n";

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::vector<ModelKind> models;
  for (const auto* a : pts) {
    if (std::find(models.begin(), models.end(), a->model) == models.end()) models.push_back(a->model);
  }
  std::sort(models.begin(), models.end());
  for (std::size_t m = 0; m < models.size(); ++m) {
    const char* color = colors[m % 5];
    std::vector<const AggregateRow*> series;
    for (const auto* a : pts) {
      if (a->model == models[m]) series.push_back(a);
    }
    std::sort(series.begin(), series.end(), [](auto* a, auto* b) { return a->n < b->n; });
    s << "<g class=\"series\" data-model=\"" << to_string(models[m]) << "\" stroke=\"" << color << "\" fill=\"" << color
      << "\">\n<polyline fill=\"none\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series.size(); ++i) {
      s << (i ? " " : "") << num(px(std::log2(series[i]->n))) << "," << num(py(std::log10(series[i]->mean)));
    }
    s << "\"/>\n";
    for (const auto* a : series) {
      const double x = px(std::log2(a->n));
      const double hi = std::log10(a->mean + a->stderr_);
      const double lo = std::log10(a->mean - a->stderr_ > 0.0 ? a->mean - a->stderr_ : a->mean);
      s << "<line x1=\"" << num(x) << "\" y1=\"" << num(py(lo)) << "\" x2=\"" << num(x) << "\" y2=\"" << num(py(hi))
        << "\"/><circle cx=\"" << num(x) << "\" cy=\"" << num(py(std::log10(a->mean))) << "\" r=\"3\"/>\n";
    }
    const double ly = kT + 14 + 20.0 * m;
    s << "<line x1=\"" << kW - kR + 12 << "\" y1=\"" << num(ly) << "\" x2=\"" << kW - kR + 36 << "\" y2=\"" << num(ly)
      << "\" stroke-width=\"2\"/><text x=\"" << kW - kR + 42 << "\" y=\"" << num(ly + 4) << "\" stroke=\"none\">"
      << to_string(models[m]) << "</text>\n</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

inline void emit_plot(const std::vector<AggregateRow>& agg, const std::filesystem::path& path, bool force) {
  std::string title = agg.empty() ? std::string("learning curves") : agg.front().target;
  write_text_file(path, render_svg(agg, title), force);
}

// ---------------------------------------------------------------------------
// Datasets on disk: one row per sequence, x0 then x1..xN flattened, then y.

inline std::string dataset_to_csv(const Dataset& ds) {
  if (ds.inputs.empty()) throw ShapeError("empty dataset");
  const int d = ds.inputs[0].dim();
  const int n = ds.inputs[0].length();
  std::string out;
  for (int t = 0; t <= n; ++t) {
    for (int j = 0; j < d; ++j) out += "x" + std::to_string(t) + "_" + std::to_string(j + 1) + ",";
  }
  out += "y\n";
  for (std::size_t r = 0; r < ds.inputs.size(); ++r) {
    const Eigen::VectorXd v = ds.inputs[r].flattened();
    for (Eigen::Index k = 0; k + 1 < v.size(); ++k) out += format_double(v(k)) + ",";
    out += format_double(ds.labels(static_cast<Eigen::Index>(r))) + "\n";
  }
  return out;
}

inline Dataset dataset_from_csv(std::string_view text, int d) {
  if (d < 1) throw InvalidDimension("d must be >= 1");
  Dataset ds;
  std::vector<double> labels;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() < static_cast<std::size_t>(2 * d + 1) || (f.size() - 1) % static_cast<std::size_t>(d) != 0) {
      throw ShapeError("dataset row does not hold whole tokens of dimension " + std::to_string(d));
    }
    const int tokens = static_cast<int>((f.size() - 1) / static_cast<std::size_t>(d));
    Eigen::VectorXd x0(d);
    Eigen::MatrixXd keys(tokens - 1, d);
    for (int j = 0; j < d; ++j) x0(j) = parse_double(f[static_cast<std::size_t>(j)]);
    for (int t = 1; t < tokens; ++t) {
      for (int j = 0; j < d; ++j) keys(t - 1, j) = parse_double(f[static_cast<std::size_t>(t * d + j)]);
    }
    ds.inputs.emplace_back(std::move(x0), std::move(keys));
    labels.push_back(parse_double(f.back()));
  }
  ds.labels = Eigen::Map<Eigen::VectorXd>(labels.data(), static_cast<Eigen::Index>(labels.size()));
  return ds;
}

}  // namespace rfattn
