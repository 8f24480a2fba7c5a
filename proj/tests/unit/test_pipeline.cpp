#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "joinaug/error.hpp"
#include "joinaug/pipeline.hpp"
#include "synth.hpp"

namespace fs = std::filesystem;
using namespace joinaug;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("joinaug_pipeline_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::io;
}

joinaug::testing::SynthRepoOptions small_repo() {
  joinaug::testing::SynthRepoOptions o;
  o.rows = 600;
  o.key_domain = 120;
  o.coreset_size = 400;
  return o;
}

// A tiny base table plus one foreign table keyed on "k".
fs::path tiny_repo() {
  fs::path d = temp_dir("tiny");
  write(d / "base.csv", "k,x,y\n1,0.5,1\n2,1.5,2\n3,2.5,3\n4,3.5,4\n5,4.5,5\n6,5.5,6\n7,6.5,7\n8,7.5,8\n9,8.5,9\n10,9.5,10\n");
  write(d / "f.csv", "k,v\n1,1\n2,2\n3,3\n");
  return d;
}

}  // namespace

TEST(Manifest, ArrayAndDefaults) {
  fs::path d = tiny_repo();
  auto c = parse_manifest(R"([{"table_path": "f.csv", "key_pairs": [{"base": "k"}]}])", d);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].id, "f");
  EXPECT_EQ(c[0].keys[0].foreign, "k");
  EXPECT_EQ(c[0].keys[0].kind, KeyKind::hard);
  EXPECT_EQ(c[0].foreign->row_count(), 3u);
}

TEST(Manifest, KeyOptionsExpand) {
  fs::path d = tiny_repo();
  auto c = parse_manifest(
      R"({"candidates": [{"id": "w", "table_path": "f.csv", "key_options": [[{"base": "k"}], [{"base": "x", "foreign": "v", "kind": "soft", "tolerance": 2}]]}]})",
      d);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].id, "w#0");
  EXPECT_EQ(c[1].id, "w#1");
  EXPECT_EQ(c[1].keys[0].kind, KeyKind::soft);
  EXPECT_EQ(c[1].keys[0].tolerance, 2.0);
}

TEST(Manifest, Errors) {
  fs::path d = tiny_repo();
  EXPECT_EQ(kind_of([&] { parse_manifest(R"([{"table_path": "f.csv"}])", d); }), ErrorKind::config);
  EXPECT_EQ(kind_of([&] { parse_manifest(R"([{"table_path": "f.csv", "key_pairs": [{"base": "k"}], "extra": 1}])", d); }),
            ErrorKind::config);
  EXPECT_EQ(kind_of([&] {
              parse_manifest(R"([{"id": "a", "table_path": "f.csv", "key_pairs": [{"base": "k"}]},
                                 {"id": "a", "table_path": "f.csv", "key_pairs": [{"base": "k"}]}])",
                             d);
            }),
            ErrorKind::config);
  EXPECT_EQ(kind_of([&] { parse_manifest(R"([{"table_path": "f.csv", "key_pairs": [{"base": "nope"}]}])", d); }),
            ErrorKind::missing_column);
  EXPECT_EQ(kind_of([&] { parse_manifest("{not json", d); }), ErrorKind::config);
}

TEST(Config, ParsesSectionsAndResolvesPaths) {
  fs::path d = tiny_repo();
  auto cfg = parse_pipeline_config(R"({"base_table": "base.csv", "target": "y", "task": "regression",
      "coreset": {"method": "stratified", "size": 50}, "join": {"strategy": "table", "soft_method": "two_way"},
      "selector": {"name": "mi", "bins": 4}, "prefilter": {"tau_tr": 24}, "estimator": {"n_trees": 7, "tuned": false},
      "seed": 3})",
                                   d);
  EXPECT_EQ(cfg.base_table, d / "base.csv");
  EXPECT_EQ(cfg.coreset_method, CoresetMethod::stratified);
  EXPECT_EQ(cfg.coreset_size, 50u);
  EXPECT_EQ(cfg.join_strategy, JoinStrategy::table);
  EXPECT_EQ(cfg.soft_method, SoftJoinMethod::two_way);
  EXPECT_EQ(cfg.selector.kind, SelectorKind::mi);
  EXPECT_EQ(cfg.selector.bins, 4u);
  EXPECT_TRUE(cfg.tuple_ratio_filter);
  EXPECT_EQ(cfg.tuple_ratio_threshold, 24.0);
  EXPECT_EQ(cfg.estimator.n_trees, 7u);
  EXPECT_FALSE(cfg.tune_estimator);
  EXPECT_EQ(cfg.seed, 3u);
}

TEST(Config, RejectsUnknownAndIllTyped) {
  fs::path d = tiny_repo();
  EXPECT_EQ(kind_of([&] { parse_pipeline_config(R"({"base_table": "b.csv", "target": "y", "task": "regression", "colour": 1})", d); }),
            ErrorKind::config);
  EXPECT_EQ(kind_of([&] { parse_pipeline_config(R"({"base_table": "b.csv", "target": "y", "task": "regression", "seed": "x"})", d); }),
            ErrorKind::config);
  EXPECT_EQ(kind_of([&] { parse_pipeline_config(R"({"base_table": "b.csv", "target": "y", "task": "ranking"})", d); }),
            ErrorKind::config);
  EXPECT_EQ(kind_of([&] { parse_pipeline_config(R"({"target": "y", "task": "regression"})", d); }), ErrorKind::config);
}

TEST(Report, ImprovementArithmetic) {
  EXPECT_NEAR(*improvement_percent(0.70, 0.83), 18.571429, 1e-6);
  EXPECT_FALSE(improvement_percent(0.0, 0.5));
  // Regression scores are negative MAE: a lower error is a positive improvement.
  EXPECT_NEAR(*improvement_percent(-2.0, -1.5), 25.0, 1e-12);
}

TEST(Report, RoundTripAndCanonicalForm) {
  RunReport r;
  r.seed = 4;
  r.task = Task::classification;
  r.metric = "accuracy";
  r.baseline_score = r.baseline_metric = 0.7;
  r.augmented_score = r.augmented_metric = 0.83;
  r.improvement_percent = improvement_percent(0.7, 0.83);
  r.base_rows = 100;
  r.coreset_rows = 80;
  r.selected_features.push_back({"w.temp", "w", "w.csv", "date->date", 0.9});
  r.candidates.push_back({"w", "w.csv", "joined", 3.0, 1.0, 0, 1});
  r.candidates.push_back({"z", "z.csv", "pruned_tuple_ratio", 40.0, 0.5, std::nullopt, 0});
  r.batches.push_back({{"w"}, 5, 1});
  r.config = R"({"seed":4})";
  r.total_seconds = 1.25;
  r.batch_seconds = {1.0};
  std::string text = report_to_json(r);
  EXPECT_NE(text.find("18.5714"), std::string::npos);
  RunReport back = report_from_json(text);
  EXPECT_EQ(report_to_json(back), text);
  auto j = nlohmann::json::parse(text);
  std::vector<std::string> keys;
  for (auto& [k, v] : j.items()) keys.push_back(k);
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
  EXPECT_EQ(nlohmann::json::parse(report_without_timing(text)).count("timing"), 0u);
}

TEST(Report, ZeroBaselineUndefined) {
  RunReport r;
  r.metric = "mae";
  r.config = "{}";
  auto j = nlohmann::json::parse(report_to_json(r));
  EXPECT_EQ(j["improvement_percent"], "undefined");
  EXPECT_FALSE(report_from_json(report_to_json(r)).improvement_percent);
}

TEST(Report, EmitToUnwritablePathIsIoError) {
  EXPECT_EQ(kind_of([] { emit_report(RunReport{}, "/nonexistent_dir/x/report.json"); }), ErrorKind::io);
}

TEST(Run, EmptyManifestReproducesBaseline) {
  fs::path d = tiny_repo();
  write(d / "empty.json", "[]");
  PipelineConfig cfg = parse_pipeline_config(
      R"({"base_table": "base.csv", "target": "y", "task": "regression", "manifest": "empty.json", "estimator": {"n_trees": 10}})",
      d);
  cfg.out_dir = d / "out";
  auto out = run_pipeline(cfg);
  EXPECT_EQ(out.report.augmented_score, out.report.baseline_score);
  EXPECT_TRUE(out.report.selected_features.empty());
  EXPECT_EQ(to_csv(out.augmented), to_csv(load_csv(d / "base.csv")));
}

TEST(Run, MissingTargetIsConfigError) {
  fs::path d = tiny_repo();
  PipelineConfig cfg = parse_pipeline_config(R"({"base_table": "base.csv", "target": "nope", "task": "regression"})", d);
  cfg.out_dir = d / "out";
  EXPECT_EQ(kind_of([&] { run_pipeline(cfg); }), ErrorKind::config);
}

TEST(Run, StageNamedInErrors) {
  fs::path d = tiny_repo();
  PipelineConfig cfg = parse_pipeline_config(R"({"base_table": "missing.csv", "target": "y", "task": "regression"})", d);
  cfg.out_dir = d / "out";
  try {
    run_pipeline(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
    EXPECT_NE(std::string(e.what()).find("load"), std::string::npos);
  }
}

TEST(Run, SyntheticRepoFindsRelevantTable) {
  auto repo = joinaug::testing::write_synthetic_repo(temp_dir("synth"), 2, small_repo());
  PipelineConfig cfg = load_pipeline_config(repo.config);
  cfg.out_dir = repo.dir / "out";
  auto out = run_pipeline(cfg);
  const auto& r = out.report;
  ASSERT_TRUE(r.improvement_percent);
  EXPECT_GT(*r.improvement_percent, 0.0);

  std::set<std::string> ids{repo.relevant_id};
  for (const auto& id : repo.noise_ids) ids.insert(id);
  std::set<std::string> relevant_kept;
  for (const auto& f : r.selected_features) {
    EXPECT_TRUE(ids.count(f.table)) << f.name;  // provenance resolves to a manifest entry
    if (f.table == repo.relevant_id) relevant_kept.insert(f.name);
  }
  EXPECT_EQ(relevant_kept, (std::set<std::string>{"relevant.f1", "relevant.f2", "relevant.f3"}));

  // Every base column and row survives, in order.
  Table base = load_csv(repo.dir / "base.csv");
  ASSERT_EQ(out.augmented.row_count(), base.row_count());
  for (std::size_t c = 0; c < base.column_count(); ++c) {
    EXPECT_EQ(out.augmented.column(c).name, base.column(c).name);
    for (std::size_t row = 0; row < base.row_count(); ++row)
      ASSERT_EQ(out.augmented.column(c).cell_text(row), base.column(c).cell_text(row));
  }
}

TEST(Run, BaselineSelectorsRun) {
  auto repo = joinaug::testing::write_synthetic_repo(temp_dir("selectors"), 5, small_repo());
  for (auto kind : {SelectorKind::ftest, SelectorKind::mi, SelectorKind::forward}) {
    PipelineConfig cfg = load_pipeline_config(repo.config);
    cfg.out_dir = repo.dir / "out";
    cfg.selector.kind = kind;
    cfg.selector.wrapper_trees = 30;
    cfg.selector.max_rounds = 10;
    auto r = run_pipeline(cfg).report;
    EXPECT_GE(r.augmented_metric, 0.0);
    EXPECT_EQ(nlohmann::json::parse(r.config)["selector"]["name"], std::string(to_string(kind)));
  }
}

TEST(Run, PrefilterMarksCandidates) {
  auto repo = joinaug::testing::write_synthetic_repo(temp_dir("prefilter"), 6, small_repo());
  PipelineConfig cfg = load_pipeline_config(repo.config);
  cfg.out_dir = repo.dir / "out";
  cfg.tuple_ratio_filter = true;
  cfg.tuple_ratio_threshold = 10.0;  // 600 rows: zone (30) and day (50) keys exceed it, k (120) does not
  auto r = run_pipeline(cfg).report;
  std::size_t pruned = 0;
  for (const auto& c : r.candidates) {
    if (c.status == "pruned_tuple_ratio") {
      ++pruned;
      EXPECT_GT(*c.tuple_ratio, 10.0);
      EXPECT_EQ(c.retained, 0u);
    }
  }
  EXPECT_EQ(pruned, 6u);
}

TEST(Run, StopAtScoreEndsEarly) {
  auto repo = joinaug::testing::write_synthetic_repo(temp_dir("stop"), 7, small_repo());
  PipelineConfig cfg = load_pipeline_config(repo.config);
  cfg.out_dir = repo.dir / "out";
  cfg.join_strategy = JoinStrategy::table;
  cfg.stop_at_score = 1e9;  // any MAE satisfies it
  auto r = run_pipeline(cfg).report;
  EXPECT_TRUE(r.stopped_early);
  EXPECT_EQ(r.batches.size(), 1u);
  std::size_t not_reached = 0;
  for (const auto& c : r.candidates) not_reached += c.status == "not_reached";
  EXPECT_EQ(not_reached, 9u);
}

TEST(Run, DeterministicOutputs) {
  auto repo = joinaug::testing::write_synthetic_repo(temp_dir("det"), 8, small_repo());
  PipelineConfig cfg = load_pipeline_config(repo.config);
  cfg.out_dir = repo.dir / "a";
  run_and_write(cfg);
  cfg.out_dir = repo.dir / "b";
  run_and_write(cfg);
  EXPECT_EQ(slurp(repo.dir / "a" / "augmented.csv"), slurp(repo.dir / "b" / "augmented.csv"));
  EXPECT_EQ(report_without_timing(slurp(repo.dir / "a" / "report.json")),
            report_without_timing(slurp(repo.dir / "b" / "report.json")));
}

#ifdef AUGMENT_BINARY
TEST(Cli, ExitCodes) {
  fs::path d = tiny_repo();
  write(d / "cfg.json", R"({"base_table": "base.csv", "target": "y", "task": "regression", "estimator": {"n_trees": 5}})");
  write(d / "bad.json", R"({"base_table": "base.csv", "target": "y", "task": "regression", "bogus": true})");
  write(d / "io.json", R"({"base_table": "nothere.csv", "target": "y", "task": "regression"})");
  const std::string bin = AUGMENT_BINARY;
  auto run = [&](const std::string& args) {
    int status = std::system((bin + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  EXPECT_EQ(run("--config " + (d / "cfg.json").string() + " --out-dir " + (d / "cli").string()), 0);
  EXPECT_TRUE(fs::exists(d / "cli" / "report.json"));
  EXPECT_TRUE(fs::exists(d / "cli" / "augmented.csv"));
  EXPECT_EQ(run("--config " + (d / "bad.json").string() + " --out-dir " + (d / "cli").string()), 2);
  EXPECT_EQ(run("--config " + (d / "cfg.json").string()), 2);  // missing --out-dir
  EXPECT_EQ(run("--config " + (d / "cfg.json").string() + " --out-dir x --selector magic"), 2);
  EXPECT_EQ(run("--config " + (d / "io.json").string() + " --out-dir " + (d / "cli").string()), 1);
}
#endif
