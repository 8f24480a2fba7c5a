// augment: run the join / select / evaluate pipeline described by a JSON config.
//
//   augment --config cfg.json --out-dir out [--seed N] [--selector rifs|ftest|mi|forward]
//           [--join-strategy table|budget|fullmat] [--budget W] [--tr-filter TAU]
//           [--stop-at-score S]
//
// Exit codes: 0 success, 2 configuration error, 1 any other failure.

#include <iostream>

#include <CLI11.hpp>

#include "joinaug/error.hpp"
#include "joinaug/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Augment a labeled base table with features joined from candidate tables"};
  std::string config_path, out_dir, selector, strategy;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> budget;
  std::optional<double> tr_filter, stop_at;
  app.add_option("--config", config_path, "pipeline config (JSON)")->required();
  app.add_option("--out-dir", out_dir, "directory for augmented.csv and report.json")->required();
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--selector", selector, "rifs, ftest, mi or forward");
  app.add_option("--join-strategy", strategy, "table, budget or fullmat");
  app.add_option("--budget", budget, "feature budget per join batch");
  app.add_option("--tr-filter", tr_filter, "prune candidates whose tuple ratio exceeds TAU");
  app.add_option("--stop-at-score", stop_at, "stop once accuracy >= S (classification) or MAE <= S (regression)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    joinaug::PipelineConfig cfg = joinaug::load_pipeline_config(config_path);
    cfg.out_dir = out_dir;
    if (seed) cfg.seed = *seed;
    if (!selector.empty()) {
      auto kind = joinaug::parse_selector(selector);
      if (!kind) throw joinaug::Error(joinaug::ErrorKind::config, "unknown selector '" + selector + "'");
      cfg.selector.kind = *kind;
    }
    if (!strategy.empty()) {
      auto s = joinaug::parse_join_strategy(strategy);
      if (!s) throw joinaug::Error(joinaug::ErrorKind::config, "unknown join strategy '" + strategy + "'");
      cfg.join_strategy = *s;
    }
    if (budget) {
      if (*budget < 1) throw joinaug::Error(joinaug::ErrorKind::config, "budget must be >= 1");
      cfg.budget = *budget;
    }
    if (tr_filter) {
      if (!(*tr_filter > 0)) throw joinaug::Error(joinaug::ErrorKind::config, "tuple-ratio threshold must be positive");
      cfg.tuple_ratio_filter = true;
      cfg.tuple_ratio_threshold = *tr_filter;
    }
    if (stop_at) cfg.stop_at_score = *stop_at;

    joinaug::RunReport r = joinaug::run_and_write(cfg);
    std::cout << r.metric << ": baseline " << r.baseline_metric << ", augmented " << r.augmented_metric;
    if (r.improvement_percent)
      std::cout << " (" << *r.improvement_percent << "% improvement)";
    else
      std::cout << " (improvement undefined)";
    std::cout << ", " << r.selected_features.size() << " foreign features kept\n";
    return 0;
  } catch (const joinaug::Error& e) {
    std::cerr << "augment: " << e.what() << "\n";
    return e.kind() == joinaug::ErrorKind::config ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "augment: " << e.what() << "\n";
    return 1;
  }
}
