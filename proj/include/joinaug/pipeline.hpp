#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "joinaug/coreset.hpp"
#include "joinaug/estimators.hpp"
#include "joinaug/join.hpp"
#include "joinaug/selection.hpp"

namespace joinaug {

// ---- manifest -------------------------------------------------------------

/// Parses a join manifest: either a JSON array of entries or an object with a
/// "candidates" array. Each entry has "table_path" (relative paths resolve
/// against `base_dir`), "key_pairs" [{base, foreign, kind, tolerance?,
/// granularity?}] and optional "id" and "score". An entry may instead list
/// "key_options" (an array of key_pairs arrays); each option becomes its own
/// candidate named "<id>#<i>". Foreign tables are loaded eagerly.
std::vector<JoinCandidate> parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir);
std::vector<JoinCandidate> load_manifest(const std::filesystem::path& path);

// ---- configuration --------------------------------------------------------

enum class SelectorKind { rifs, ftest, mi, forward };

std::string_view to_string(SelectorKind kind);
std::optional<SelectorKind> parse_selector(std::string_view text);

struct SelectorSettings {
  SelectorKind kind = SelectorKind::rifs;
  RifsConfig rifs;                 // eta, k, thresholds, nu, noise, ranking forest
  std::size_t wrapper_trees = 100;  // forest size used to score feature subsets
  std::size_t max_rounds = 50;      // forward selection
  std::size_t bins = kDefaultMiBins;
};

struct PipelineConfig {
  std::filesystem::path base_table;
  std::string target;
  Task task = Task::regression;
  std::optional<std::filesystem::path> manifest;
  std::vector<std::string> exclude_columns;  // base columns kept out of the feature matrix

  CoresetMethod coreset_method = CoresetMethod::uniform;
  std::optional<std::size_t> coreset_size;  // default min(train rows, 20000)

  JoinStrategy join_strategy = JoinStrategy::budget;
  std::optional<std::size_t> budget;  // default: coreset size
  SoftJoinMethod soft_method = SoftJoinMethod::nearest;
  std::size_t max_cardinality = kDefaultMaxCardinality;

  SelectorSettings selector;

  bool tuple_ratio_filter = false;
  double tuple_ratio_threshold = 20.0;

  ForestParams estimator;
  bool tune_estimator = true;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  /// Early exit once the retained features reach this score: accuracy for
  /// classification, mean absolute error (upper bound) for regression.
  std::optional<double> stop_at_score;

  std::filesystem::path out_dir;
};

/// Relative paths inside the config resolve against `base_dir`. Unknown or
/// ill-typed fields raise ConfigError.
PipelineConfig parse_pipeline_config(std::string_view json_text, const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Canonical JSON echo of the settings that influence results (no output paths).
std::string config_echo(const PipelineConfig& cfg);

// ---- report ---------------------------------------------------------------

struct SelectedFeature {
  std::string name;
  std::string table;       // candidate id
  std::string table_path;
  std::string key;         // "base->foreign" pairs joined by ","
  std::optional<double> survival;  // RIFS r* when the RIFS selector ran
};

struct CandidateStatus {
  std::string id;
  std::string table_path;
  std::string status;  // "joined", "pruned_tuple_ratio", "not_reached"
  std::optional<double> tuple_ratio;
  double score = 0.0;
  std::optional<std::size_t> batch;
  std::size_t retained = 0;
};

struct BatchSummary {
  std::vector<std::string> candidates;
  std::size_t features_considered = 0;
  std::size_t features_selected = 0;
};

struct RunReport {
  std::uint64_t seed = 0;
  Task task = Task::regression;
  std::string metric;           // "accuracy" or "mae"
  double baseline_score = 0.0;  // larger is better (negative MAE for regression)
  double augmented_score = 0.0;
  double baseline_metric = 0.0;   // accuracy or |MAE|
  double augmented_metric = 0.0;
  std::optional<double> improvement_percent;  // empty when the baseline score is 0
  std::size_t base_rows = 0;
  std::size_t coreset_rows = 0;
  std::vector<SelectedFeature> selected_features;
  std::vector<CandidateStatus> candidates;
  std::vector<BatchSummary> batches;
  bool stopped_early = false;
  std::string config;  // canonical JSON echo

  // Excluded from determinism checks.
  double total_seconds = 0.0;
  std::vector<double> batch_seconds;
};

/// 100 * (augmented - baseline) / |baseline|; empty for a zero baseline.
std::optional<double> improvement_percent(double baseline, double augmented);

/// Canonical JSON: sorted keys, numbers rounded to 6 significant digits,
/// timing under a separate "timing" key.
std::string report_to_json(const RunReport& report);
RunReport report_from_json(std::string_view text);
void emit_report(const RunReport& report, const std::filesystem::path& path);

/// Report JSON with the "timing" key removed, for determinism comparisons.
std::string report_without_timing(std::string_view json_text);

// ---- run ------------------------------------------------------------------

struct PipelineOutput {
  RunReport report;
  Table augmented;
};

/// Baseline, coreset, optional tuple-ratio prefilter, join plan, batch-wise
/// join and selection, final fit on base plus retained features. Errors keep
/// their kind and name the failing stage.
PipelineOutput run_pipeline(const PipelineConfig& cfg);

/// run_pipeline, then writes augmented.csv and report.json into cfg.out_dir.
RunReport run_and_write(const PipelineConfig& cfg);

}  // namespace joinaug
