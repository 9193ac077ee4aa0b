// rfattn: command-line front end.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime or
// numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rfattn/rfattn.hpp"

namespace fs = std::filesystem;
using namespace rfattn;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path output_dir() {
  const char* env = std::getenv("RFATTN_OUTPUT_DIR");
  return (env && *env) ? fs::path(env) : fs::path(".");
}

fs::path resolve_output(const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : output_dir() / path;
}

/// Config flags shared by sweep, fit and gen-data. Each top-level config key
/// has a flag of the same name; flags override the file.
struct ConfigFlags {
  std::string config;
  std::string preset;
  std::map<std::string, std::string> values;
  std::vector<std::string> target;
  bool force = false;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "Config file (key = value lines plus a [target] section)");
    app->add_option("--preset", preset, "Start from a built-in preset instead of the defaults")
        ->check(CLI::IsMember({"desk", "paper"}));
    const std::map<std::string, std::string> help = {
        {"d", "Token dimension"},
        {"N", "Number of key tokens"},
        {"M", "Heads of RFA and BRFA"},
        {"M_rfmlp", "Width of RFMLP (must equal M(d+1) when match_params is true)"},
        {"match_params", "Set M_rfmlp = M(d+1) (true/false)"},
        {"bias_scale", "BRFA bias scale gamma0"},
        {"n_list", "Comma-separated training sizes"},
        {"n_test", "Test set size per seed"},
        {"seeds", "Number of independent seeds"},
        {"seed", "Root seed"},
        {"models", "Comma-separated subset of rfa,brfa,rfmlp"},
        {"lambda_grid", "Comma-separated ridge values, or 'default'"},
        {"output_csv", "CSV path (relative paths resolve against $RFATTN_OUTPUT_DIR)"},
        {"output_plot", "SVG path (relative paths resolve against $RFATTN_OUTPUT_DIR)"},
        {"threads", "Worker threads (0 = all cores); results do not depend on it"},
        {"record_wall_time", "Record per-row wall time (true/false); false gives byte-stable CSVs"},
    };
    for (const auto& key : config_keys()) {
      if (key == "force") continue;
      options[key] = app->add_option("--" + key, values[key], help.at(key));
    }
    app->add_option("--target", target, "Target block entry KEY=VALUE, repeatable (e.g. --target kind=f2 --target q=3)");
    app->add_flag("--force", force, "Overwrite existing output files");
  }

  [[nodiscard]] ExperimentConfig build() const {
    ExperimentConfig cfg;
    if (!config.empty()) {
      if (!fs::exists(config)) throw UsageError("config file '" + config + "' does not exist");
      cfg = load_config(config);
    } else if (preset == "desk") {
      cfg = desk_preset();
    } else if (preset == "paper") {
      cfg = paper_preset();
    }
    for (const auto& key : config_keys()) {
      auto it = options.find(key);
      if (it != options.end() && it->second->count() > 0) set_config_value(cfg, key, values.at(key));
    }
    if (force) cfg.force = true;
    for (const auto& kv : target) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--target expects KEY=VALUE, got '" + kv + "'");
      const std::string key(trim(std::string_view(kv).substr(0, eq)));
      const std::string value(trim(std::string_view(kv).substr(eq + 1)));
      if (key == "kind" && cfg.target_block["kind"] != value) cfg.target_block.clear();
      cfg.target_block[key] = value;
    }
    cfg.validate();
    return cfg;
  }
};

void print_aggregate(const std::vector<AggregateRow>& agg) {
  std::printf("%-6s %-14s %6s %5s %14s %14s\n", "model", "target", "n", "seeds", "mean_test_mse", "stderr");
  for (const auto& a : agg) {
    std::printf("%-6s %-14s %6d %5d %14.6g %14.6g%s\n", std::string(to_string(a.model)).c_str(), a.target.c_str(), a.n,
                a.count, a.mean, a.stderr_, a.single_seed ? "  (single seed)" : "");
  }
}

int cmd_sweep(const ConfigFlags& flags) {
  const ExperimentConfig cfg = flags.build();
  const fs::path csv = resolve_output(cfg.output_csv);
  const fs::path svg = resolve_output(cfg.output_plot);
  if (!cfg.force) {
    for (const auto& p : {csv, svg}) {
      if (fs::exists(p)) throw OutputExists("refusing to overwrite existing file '" + p.string() + "' (use --force)");
    }
  }
  const SweepResult result = run_sweep(cfg);
  emit_csv(result, csv, cfg.force);
  const auto agg = aggregate(result);
  emit_plot(agg, svg, cfg.force);
  print_aggregate(agg);
  int failed = 0;
  for (const auto& r : result.rows) {
    if (r.failed) {
      ++failed;
      std::fprintf(stderr, "row %s n=%d seed=%d failed: %s\n", std::string(to_string(r.model)).c_str(), r.n, r.seed,
                   r.error.c_str());
    }
  }
  std::printf("wrote %s and %s (%zu rows, %d failed)\n", csv.string().c_str(), svg.string().c_str(), result.rows.size(),
              failed);
  return failed == static_cast<int>(result.rows.size()) ? 2 : 0;
}

int cmd_fit(const ConfigFlags& flags, const std::string& model, int n, int seed_index) {
  const ExperimentConfig cfg = flags.build();
  const TargetSpec target = cfg.target();
  const ModelKind kind = parse_model_kind(model);
  if (n < 2) throw UsageError("--n must be >= 2");
  if (seed_index < 0) throw UsageError("--seed-index must be >= 0");
  const Dataset test = make_test_set(cfg, target, seed_index);
  FitResult fit;
  const SweepRow row = run_cell(cfg, target, kind, n, seed_index, test, cfg.threads, &fit);
  if (row.failed) throw NumericalError(row.error);
  SweepResult r;
  r.rows.push_back(row);
  std::cout << to_csv(r);
  return 0;
}

int cmd_gen_data(const ConfigFlags& flags, int n, int seed_index, const std::string& split_name,
                 const std::string& out) {
  const ExperimentConfig cfg = flags.build();
  const TargetSpec target = cfg.target();
  if (seed_index < 0) throw UsageError("--seed-index must be >= 0");
  Dataset ds;
  if (split_name == "test") {
    ds = make_test_set(cfg, target, seed_index);
  } else {
    if (n < 1) throw UsageError("--n must be >= 1");
    RngStream s = SweepStreams::train(cfg, seed_index, n);
    ds = make_dataset(target, s, n, cfg.d, cfg.N);
  }
  const fs::path path = resolve_output(out);
  write_text_file(path, dataset_to_csv(ds), cfg.force);
  std::printf("wrote %zu sequences (d=%d, N=%d, target %s) to %s\n", ds.size(), cfg.d, cfg.N, target.id().c_str(),
              path.string().c_str());
  return 0;
}

int cmd_kernel_check(const std::string& model, int heads, int pairs, std::uint64_t seed, int d, int n_keys,
                     std::optional<double> bias) {
  const ModelKind kind = parse_model_kind(model);
  if (heads < 2) throw UsageError("--heads must be >= 2");
  if (pairs < 1) throw UsageError("--pairs must be >= 1");
  const double gamma = kind == ModelKind::kBRFA ? bias.value_or(1.0) : 0.0;
  if (kind != ModelKind::kBRFA && bias && *bias != 0.0) throw InvalidConfig("--bias_scale requires --model brfa");
  RngStream root(seed);
  RngStream data = root.derive(StreamTag::kPairs, 0);
  std::printf("%4s %14s %14s %12s %8s\n", "pair", "analytic", "monte_carlo", "stderr", "z");
  double max_z = 0.0;
  for (int p = 0; p < pairs; ++p) {
    const TokenSequence x = sample_sequence(data, d, n_keys);
    const TokenSequence y = sample_sequence(data, d, n_keys);
    double analytic = 0.0;
    if (kind == ModelKind::kRFA) analytic = rfa_kernel(x, y);
    else if (kind == ModelKind::kBRFA) analytic = brfa_kernel(x, y, KernelSpec::brfa(gamma));
    else analytic = arccos_relu_kernel(x.flattened().dot(y.flattened()) / (n_keys + 2));
    RngStream mc = root.derive(StreamTag::kMonteCarlo, static_cast<std::uint64_t>(p));
    const McEstimate e = mc_kernel(x, y, kind, mc, heads, gamma);
    const double z = e.stderr_ > 0.0 ? (e.estimate - analytic) / e.stderr_ : 0.0;
    max_z = std::max(max_z, std::abs(z));
    std::printf("%4d %14.8f %14.8f %12.3e %8.3f\n", p, analytic, e.estimate, e.stderr_, z);
  }
  std::printf("max |z| = %.3f over %d pairs (%s, %d heads, d=%d, N=%d%s)\n", max_z, pairs,
              std::string(to_string(kind)).c_str(), heads, d, n_keys,
              kind == ModelKind::kBRFA ? (", gamma0=" + format_double(gamma)).c_str() : "");
  return 0;
}

struct ComplexityArgs {
  std::string target;
  int p = 1;
  int q = 1;
  double gamma = 0.0;
  double eta = 3.0;
  int L = 3;
  int d = 16;
  int N = 16;
  std::uint64_t beta_seed = 1;
  std::uint64_t z_seed = 1;
};

int cmd_complexity(const ComplexityArgs& a) {
  TargetSpec t = [&] {
    if (a.target == "f1") return TargetSpec::f1(a.d, a.p, a.beta_seed);
    if (a.target == "f2") return TargetSpec::f2(a.d, a.q, a.beta_seed);
    if (a.target == "f3") return TargetSpec::f3(a.d, a.p, a.beta_seed);
    if (a.target == "f4") return TargetSpec::f4(a.d, a.gamma, a.beta_seed, a.z_seed);
    if (a.target == "arctan") return TargetSpec::arctan_preset(a.d, a.eta, a.beta_seed);
    throw UsageError("unknown target '" + a.target + "'");
  }();
  std::printf("target = %s (d=%d, N=%d)\n", t.id().c_str(), a.d, a.N);
  std::printf("B_RFA = %s\n", format_double(complexity_rfa(t)).c_str());
  std::printf("B_RFMLP = %s\n", format_double(complexity_rfmlp(t, a.N)).c_str());
  try {
    const auto b = complexity_brfa(t, a.L);
    std::printf("B_BRFA(L=%d) = %s\n", a.L, format_double(b.b).c_str());
  } catch (const Unsupported& e) {
    std::printf("B_BRFA(L=%d) = unsupported (%s)\n", a.L, e.what());
  }
  std::printf("eps_L = %s\n", format_double(brfa_epsilon(a.L)).c_str());
  return 0;
}

int cmd_plot(const std::string& csv, const std::string& out, bool force) {
  if (!fs::exists(csv)) throw UsageError("CSV file '" + csv + "' does not exist");
  const SweepResult r = parse_csv(read_text_file(csv));
  if (r.rows.empty()) throw InvalidConfig("CSV has no rows to plot");
  const fs::path path = resolve_output(out);
  emit_plot(aggregate(r), path, force);
  std::printf("wrote %s\n", path.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-feature attention models: kernels, complexity measures and learning-curve sweeps"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  ConfigFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "Run a (model, n, seed) sweep and write CSV and SVG");
  sweep_flags.attach(sweep);

  ConfigFlags fit_flags;
  std::string fit_model = "rfa";
  int fit_n = 256;
  int fit_seed_index = 0;
  auto* fit = app.add_subcommand("fit", "Fit a single (model, n, seed) cell and print its CSV row");
  fit_flags.attach(fit);
  fit->add_option("--model", fit_model, "Model: rfa, brfa or rfmlp")->capture_default_str();
  fit->add_option("--n", fit_n, "Training set size")->capture_default_str();
  fit->add_option("--seed-index", fit_seed_index, "Seed index within the config")->capture_default_str();

  ConfigFlags gen_flags;
  int gen_n = 256;
  int gen_seed_index = 0;
  std::string gen_split = "train";
  std::string gen_out = "data.csv";
  auto* gen = app.add_subcommand("gen-data", "Sample sequences and target labels to a CSV file");
  gen_flags.attach(gen);
  gen->add_option("--n", gen_n, "Number of sequences (train split)")->capture_default_str();
  gen->add_option("--seed-index", gen_seed_index, "Seed index within the config")->capture_default_str();
  gen->add_option("--split", gen_split, "train or test")->check(CLI::IsMember({"train", "test"}))->capture_default_str();
  gen->add_option("--out", gen_out, "Output CSV path")->capture_default_str();

  std::string kc_model = "rfa";
  int kc_heads = 100000;
  int kc_pairs = 5;
  std::uint64_t kc_seed = 0;
  int kc_d = 4;
  int kc_n = 3;
  std::optional<double> kc_bias;
  auto* kc = app.add_subcommand("kernel-check", "Compare Monte-Carlo kernel estimates with the analytic kernel");
  kc->add_option("--model", kc_model, "Model: rfa, brfa or rfmlp")->capture_default_str();
  kc->add_option("--heads", kc_heads, "Monte-Carlo heads per pair")->capture_default_str();
  kc->add_option("--pairs", kc_pairs, "Number of random sequence pairs")->capture_default_str();
  kc->add_option("--seed", kc_seed, "Root seed")->capture_default_str();
  kc->add_option("--d", kc_d, "Token dimension")->capture_default_str();
  kc->add_option("--N", kc_n, "Number of key tokens")->capture_default_str();
  kc->add_option("--bias_scale", kc_bias, "BRFA bias scale gamma0 (default 1)");

  ComplexityArgs cx;
  auto* comp = app.add_subcommand("complexity", "Print the complexity measures of a catalog target");
  comp->add_option("--target", cx.target, "f1, f2, f3, f4 or arctan")->required();
  comp->add_option("--p", cx.p, "Degree p of f1 / f3")->capture_default_str();
  comp->add_option("--q", cx.q, "Degree q of f2")->capture_default_str();
  comp->add_option("--gamma", cx.gamma, "Identity shift of f4")->capture_default_str();
  comp->add_option("--eta", cx.eta, "Scale of the arctan preset")->capture_default_str();
  comp->add_option("--L", cx.L, "Truncation level L of the BRFA measure")->capture_default_str();
  comp->add_option("--d", cx.d, "Token dimension")->capture_default_str();
  comp->add_option("--N", cx.N, "Number of key tokens (RFMLP measure)")->capture_default_str();
  comp->add_option("--beta_seed", cx.beta_seed, "Seed of beta")->capture_default_str();
  comp->add_option("--z_seed", cx.z_seed, "Seed of the f4 matrix Z")->capture_default_str();

  std::string plot_csv;
  std::string plot_out = "sweep.svg";
  bool plot_force = false;
  auto* plot = app.add_subcommand("plot", "Render learning curves from a sweep CSV");
  plot->add_option("--csv", plot_csv, "Sweep CSV")->required();
  plot->add_option("--out", plot_out, "Output SVG path")->capture_default_str();
  plot->add_flag("--force", plot_force, "Overwrite an existing file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*sweep) return cmd_sweep(sweep_flags);
    if (*fit) return cmd_fit(fit_flags, fit_model, fit_n, fit_seed_index);
    if (*gen) return cmd_gen_data(gen_flags, gen_n, gen_seed_index, gen_split, gen_out);
    if (*kc) return cmd_kernel_check(kc_model, kc_heads, kc_pairs, kc_seed, kc_d, kc_n, kc_bias);
    if (*comp) return cmd_complexity(cx);
    if (*plot) return cmd_plot(plot_csv, plot_out, plot_force);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const InvalidConfig& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const InvalidDimension& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const OutputExists& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 2;
  }
  return 1;
}
