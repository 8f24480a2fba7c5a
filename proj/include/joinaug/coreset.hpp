#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "joinaug/tabular.hpp"

namespace joinaug {

enum class CoresetMethod { uniform, stratified, sketch };

std::string_view to_string(CoresetMethod method);
std::optional<CoresetMethod> parse_coreset_method(std::string_view text);

/// Row subset of a table. Sketches carry no indices: their rows are linear
/// combinations of the input rows.
struct Coreset {
  std::vector<std::size_t> source_row_indices;  // ascending
  std::vector<double> weights;
  CoresetMethod method = CoresetMethod::uniform;

  std::size_t size() const { return weights.size(); }
};

inline constexpr std::size_t kDefaultCoresetCap = 20000;

Coreset sample_uniform(std::size_t row_count, std::size_t m, std::uint64_t seed);
Coreset sample_uniform(const Table& table, std::size_t m, std::uint64_t seed);

/// Proportional allocation per stratum (largest remainder), at least one row
/// per non-empty stratum when m allows it, uniform without replacement inside
/// each stratum.
Coreset sample_stratified(const Table& table, const std::string& label_column, std::size_t m, std::uint64_t seed);

/// Per-stratum row allocation used by sample_stratified; exposed for tests.
std::vector<std::size_t> allocate_strata(const std::vector<std::size_t>& stratum_sizes, std::size_t m);

struct SketchConfig {
  double epsilon = 0.5;
  double delta = 0.1;
  std::size_t repetitions = 1;
  std::size_t target_rows = 1;

  /// repetitions = ceil(log2 n), target_rows = ceil(d ln n / epsilon^2).
  static SketchConfig for_shape(std::size_t n, std::size_t d, double epsilon, double delta = 0.1);
};

/// Sparse embedding: one bucket and sign per input row per round. Returned
/// as an explicit list so tests can inspect the structure.
struct SketchPlan {
  std::size_t target_rows = 0;
  std::size_t repetitions = 0;
  std::vector<std::vector<std::pair<std::uint32_t, std::int8_t>>> rounds;  // [round][row] -> (bucket, sign)
};

SketchPlan make_sketch_plan(std::size_t n, const SketchConfig& cfg, std::uint64_t seed);
Eigen::MatrixXd apply_sketch(const SketchPlan& plan, const Eigen::MatrixXd& a);

/// Pi * A with `cfg.target_rows` rows; rounds are summed and scaled by
/// 1/sqrt(repetitions). Rejects target_rows >= n.
FeatureMatrix sketch_osnap(const FeatureMatrix& a, const SketchConfig& cfg, std::uint64_t seed);

struct SketchedData {
  FeatureMatrix x;
  LabelVector y;
};

/// Classification: each label block is sketched on its own and the blocks
/// are stacked with their label re-attached. Regression: the target is
/// sketched together with the features as one extra column.
SketchedData sketch_labeled(const FeatureMatrix& a, const LabelVector& y, const SketchConfig& cfg,
                            std::uint64_t seed);

}  // namespace joinaug
