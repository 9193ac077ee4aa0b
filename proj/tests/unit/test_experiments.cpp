#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "rfattn/experiments.hpp"

using namespace rfattn;

namespace {

ExperimentConfig tiny() {
  ExperimentConfig cfg;
  cfg.d = 3;
  cfg.N = 2;
  cfg.M = 6;
  cfg.n_list = {8, 16};
  cfg.n_test = 30;
  cfg.seeds = 2;
  cfg.threads = 1;
  cfg.record_wall_time = false;
  return cfg;
}

SweepRow row(ModelKind model, int n, int seed, double test) {
  SweepRow r;
  r.model = model;
  r.target = "f1_p2";
  r.n = n;
  r.seed = seed;
  r.lambda = 0.1;
  r.train_mse = test / 2.0;
  r.test_mse = test;
  r.k1_hat = 1.0;
  r.k2_hat = 2.0;
  return r;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("rfattn_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(Config, Defaults) {
  const ExperimentConfig cfg;
  EXPECT_EQ(cfg.d, 16);
  EXPECT_EQ(cfg.N, 16);
  EXPECT_EQ(cfg.n_list.front(), 16);
  EXPECT_EQ(cfg.n_list.back(), 4096);
  EXPECT_EQ(cfg.n_test, 1000);
  EXPECT_EQ(cfg.seeds, 5);
  EXPECT_EQ(cfg.rfmlp_width(), 1000 * 17);
  EXPECT_EQ(cfg.width(ModelKind::kBRFA), 1000);
  const ExperimentConfig desk = desk_preset();
  EXPECT_EQ(desk.d, 8);
  EXPECT_EQ(desk.M, 200);
  EXPECT_EQ(desk.seeds, 3);
  EXPECT_EQ(desk.n_list.back(), 1024);
}

TEST(Config, ParseAndRoundTrip) {
  const std::string text =
      "# comment\n"
      "d = 4\nN = 3\nM = 10\nn_list = 16, 32\nseeds = 2\nmodels = RFA,RFMLP\n"
      "record_wall_time = false\n"
      "[target]\nkind = f2\nq = 3\nbeta_seed = 5\n";
  const ExperimentConfig cfg = parse_config(text);
  EXPECT_EQ(cfg.d, 4);
  EXPECT_EQ(cfg.N, 3);
  EXPECT_EQ(cfg.n_list, (std::vector<int>{16, 32}));
  EXPECT_EQ(cfg.models, (std::vector<ModelKind>{ModelKind::kRFA, ModelKind::kRFMLP}));
  EXPECT_FALSE(cfg.record_wall_time);
  EXPECT_EQ(cfg.target().id(), "f2_q3");
  EXPECT_EQ(cfg.target().dim(), 4);
  const ExperimentConfig back = parse_config(to_config_text(cfg));
  EXPECT_EQ(to_config_text(back), to_config_text(cfg));
  EXPECT_EQ(back.lambda_grid, cfg.lambda_grid);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config("dd = 3\n"), InvalidConfig);
  EXPECT_THROW(parse_config("d = three\n"), InvalidConfig);
  EXPECT_THROW(parse_config("[target]\nkind = f1\np = 2\nfoo = 1\n"), InvalidConfig);
  EXPECT_THROW(parse_config("d = 0\n"), InvalidDimension);
  EXPECT_THROW(parse_config("models = RFA, GPT\n"), InvalidConfig);
  EXPECT_THROW(load_config("/nonexistent/rfattn.cfg"), InvalidConfig);
}

TEST(Config, ParameterMatching) {
  ExperimentConfig cfg = tiny();
  cfg.M_rfmlp = 5;
  EXPECT_EQ(cfg.rfmlp_width(), cfg.M * (cfg.d + 1));
  cfg.match_params = false;
  EXPECT_EQ(cfg.rfmlp_width(), 5);
}

TEST(Sweep, SingleCellGivesOneRow) {
  ExperimentConfig cfg = tiny();
  cfg.n_list = {16};
  cfg.seeds = 1;
  cfg.models = {ModelKind::kRFA};
  const SweepResult r = run_sweep(cfg);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_FALSE(r.rows[0].failed) << r.rows[0].error;
  EXPECT_GE(r.rows[0].test_mse, 0.0);
  EXPECT_EQ(r.rows[0].target, "f1_p2");
  EXPECT_EQ(r.rows[0].wall_time_s, 0.0);
}

TEST(Sweep, RowOrderAndDeterminism) {
  ExperimentConfig cfg = tiny();
  const SweepResult a = run_sweep(cfg);
  ASSERT_EQ(a.rows.size(), 3u * 2u * 2u);
  for (std::size_t i = 1; i < a.rows.size(); ++i) {
    const auto& p = a.rows[i - 1];
    const auto& q = a.rows[i];
    EXPECT_LT(std::tie(p.model, p.n, p.seed), std::tie(q.model, q.n, q.seed));
  }
  cfg.threads = 4;
  const SweepResult b = run_sweep(cfg);
  EXPECT_EQ(to_csv(a), to_csv(b));
  EXPECT_EQ(to_csv(a), to_csv(run_sweep(tiny())));
}

TEST(Sweep, CellsDoNotDependOnOtherCells) {
  ExperimentConfig cfg = tiny();
  const SweepResult all = run_sweep(cfg);
  cfg.models = {ModelKind::kBRFA};
  cfg.n_list = {16};
  const SweepResult one = run_sweep(cfg);
  ASSERT_EQ(one.rows.size(), 2u);
  for (const auto& r : all.rows) {
    if (r.model == ModelKind::kBRFA && r.n == 16) {
      EXPECT_EQ(r.test_mse, one.rows[static_cast<std::size_t>(r.seed)].test_mse);
    }
  }
}

TEST(Sweep, FailuresAreRecordedPerRow) {
  // A constant target gives zero-variance labels.
  ExperimentConfig cfg = tiny();
  cfg.target_block = {{"kind", "f1"}, {"p", "0"}};
  const SweepResult r = run_sweep(cfg);
  ASSERT_EQ(r.rows.size(), 12u);
  for (const auto& row : r.rows) {
    EXPECT_TRUE(row.failed);
    EXPECT_TRUE(std::isnan(row.test_mse));
    EXPECT_NE(row.error.find("variance"), std::string::npos);
  }
}

TEST(Aggregate, Examples) {
  SweepResult r;
  for (int s = 0; s < 3; ++s) r.rows.push_back(row(ModelKind::kRFA, 16, s, 1.0 + s));
  for (int s = 0; s < 3; ++s) r.rows.push_back(row(ModelKind::kRFA, 32, s, 1.0));
  r.rows.push_back(row(ModelKind::kBRFA, 16, 0, 0.5));
  const auto agg = aggregate(r);
  ASSERT_EQ(agg.size(), 3u);
  const AggregateRow* a = find_aggregate(agg, ModelKind::kRFA, 16);
  ASSERT_NE(a, nullptr);
  EXPECT_DOUBLE_EQ(a->mean, 2.0);
  EXPECT_NEAR(a->stderr_, 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_FALSE(a->single_seed);
  const AggregateRow* b = find_aggregate(agg, ModelKind::kRFA, 32);
  EXPECT_DOUBLE_EQ(b->mean, 1.0);
  EXPECT_EQ(b->stderr_, 0.0);
  const AggregateRow* c = find_aggregate(agg, ModelKind::kBRFA, 16);
  EXPECT_TRUE(c->single_seed);
  EXPECT_EQ(c->stderr_, 0.0);
  EXPECT_EQ(find_aggregate(agg, ModelKind::kRFMLP, 16), nullptr);
  EXPECT_THROW(aggregate(SweepResult{}), InvalidConfig);
}

TEST(Aggregate, FailedRowsAreCountedNotAveraged) {
  SweepResult r;
  r.rows.push_back(row(ModelKind::kRFA, 16, 0, 2.0));
  SweepRow bad = row(ModelKind::kRFA, 16, 1, std::nan(""));
  bad.failed = true;
  r.rows.push_back(bad);
  const auto agg = aggregate(r);
  EXPECT_EQ(agg[0].count, 1);
  EXPECT_EQ(agg[0].failed, 1);
  EXPECT_EQ(agg[0].mean, 2.0);
}

TEST(Csv, HeaderAndRoundTrip) {
  EXPECT_EQ(to_csv(SweepResult{}), std::string(kCsvHeader) + "\n");
  EXPECT_TRUE(parse_csv(to_csv(SweepResult{})).rows.empty());
  SweepResult r;
  r.rows.push_back(row(ModelKind::kRFMLP, 64, 2, 0.123456789012345678));
  r.rows.back().wall_time_s = 0.25;
  r.rows.back().k2_hat = 1e-300;
  SweepRow bad = row(ModelKind::kBRFA, 8, 0, std::nan(""));
  bad.failed = true;
  bad.lambda = std::nan("");
  r.rows.push_back(bad);
  const std::string text = to_csv(r);
  const SweepResult back = parse_csv(text);
  ASSERT_EQ(back.rows.size(), 2u);
  const auto& a = back.rows[0];
  EXPECT_EQ(a.model, ModelKind::kRFMLP);
  EXPECT_EQ(a.target, "f1_p2");
  EXPECT_EQ(a.n, 64);
  EXPECT_EQ(a.seed, 2);
  EXPECT_EQ(a.test_mse, r.rows[0].test_mse);
  EXPECT_EQ(a.k2_hat, 1e-300);
  EXPECT_EQ(a.wall_time_s, 0.25);
  EXPECT_TRUE(std::isnan(back.rows[1].test_mse));
  EXPECT_EQ(to_csv(back), text);
  EXPECT_THROW(parse_csv("model,n\nRFA,1\n"), InvalidConfig);
}

TEST(Plot, OneSeriesPerModel) {
  SweepResult r;
  for (ModelKind m : {ModelKind::kRFA, ModelKind::kBRFA, ModelKind::kRFMLP}) {
    for (int n : {16, 32, 64}) {
      for (int s = 0; s < 2; ++s) r.rows.push_back(row(m, n, s, 1.0 / n + 0.01 * s));
    }
  }
  const std::string svg = render_svg(aggregate(r), "f1_p2");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  std::size_t count = 0;
  for (std::size_t pos = svg.find("class=\"series\""); pos != std::string::npos;
       pos = svg.find("class=\"series\"", pos + 1)) {
    ++count;
  }
  EXPECT_EQ(count, 3u);
  EXPECT_NE(svg.find("data-model=\"RFMLP\""), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Output, RefusesToOverwrite) {
  const auto dir = temp_dir("overwrite");
  const auto path = dir / "out.csv";
  write_text_file(path, "a\n", false);
  EXPECT_THROW(write_text_file(path, "b\n", false), OutputExists);
  EXPECT_EQ(read_text_file(path), "a\n");
  write_text_file(path, "b\n", true);
  EXPECT_EQ(read_text_file(path), "b\n");
  write_text_file(dir / "nested" / "x.csv", "c\n", false);
  EXPECT_EQ(read_text_file(dir / "nested" / "x.csv"), "c\n");
  EXPECT_THROW(write_text_file(path / "x.csv", "d\n", false), Error);
  std::filesystem::remove_all(dir);
}

TEST(Dataset, CsvRoundTrip) {
  RngStream s(3);
  const Dataset ds = make_dataset(TargetSpec::f1(3, 2, 1), s, 5, 3, 2);
  const Dataset back = dataset_from_csv(dataset_to_csv(ds), 3);
  ASSERT_EQ(back.inputs.size(), 5u);
  EXPECT_EQ(back.labels, ds.labels);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(back.inputs[i].query(), ds.inputs[i].query());
    EXPECT_EQ(back.inputs[i].keys(), ds.inputs[i].keys());
  }
}

TEST(Streams, TrainSetsAreNestedFreeAndSeedSpecific) {
  const ExperimentConfig cfg = tiny();
  RngStream a = SweepStreams::train(cfg, 0, 16);
  RngStream b = SweepStreams::train(cfg, 1, 16);
  RngStream c = SweepStreams::train(cfg, 0, 16);
  const double x = a.normal();
  EXPECT_NE(x, b.normal());
  EXPECT_EQ(x, c.normal());
}

TEST(Config, ShippedPresetsParse) {
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(RFATTN_CONFIG_DIR)) {
    if (entry.path().extension() != ".cfg") continue;
    ++count;
    const ExperimentConfig cfg = load_config(entry.path());
    EXPECT_NO_THROW(cfg.target()) << entry.path();
    EXPECT_EQ(cfg.rfmlp_width(), cfg.M * (cfg.d + 1)) << entry.path();
    EXPECT_EQ(cfg.output_csv, entry.path().stem().string() + ".csv");
  }
  EXPECT_GE(count, 14);
}
