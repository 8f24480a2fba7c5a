#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "joinaug/tabular.hpp"

namespace joinaug {

enum class KeyKind { hard, soft };

struct KeyPair {
  std::string base;
  std::string foreign;
  KeyKind kind = KeyKind::hard;
  std::optional<double> tolerance;           // soft keys: max |base - foreign| distance
  std::optional<Granularity> granularity;   // datetime keys: resample both sides to this resolution
};

struct JoinCandidate {
  std::string id;
  std::shared_ptr<const Table> foreign;
  std::vector<KeyPair> keys;
  std::optional<double> score;
  std::string table_path;  // where the foreign table was loaded from, for provenance

  std::vector<std::string> foreign_key_columns() const;
  bool has_soft_key() const;
};

enum class SoftJoinMethod { nearest, two_way };

std::string_view to_string(SoftJoinMethod method);
std::optional<SoftJoinMethod> parse_soft_join_method(std::string_view text);

/// One output row per distinct key tuple: numeric columns by mean,
/// categorical by mode (ties to the lexicographically smallest value),
/// datetime by rounded mean of the epoch values.
Table pre_aggregate(const Table& foreign, std::span<const std::string> keys);

/// Exact-match LEFT JOIN on the candidate's keys (all must be hard). The
/// foreign side must already be unique on its keys. Output keeps base rows
/// and order; unmatched rows get missing foreign cells.
Table left_join_hard(const Table& base, const JoinCandidate& cand);

/// Nearest foreign key for the (single) soft key, inside the group matched
/// exactly by any hard keys. Equal distances resolve to the smaller key.
Table soft_join_nn(const Table& base, const JoinCandidate& cand);

/// Interpolates between the bracketing foreign rows: numeric cells join as
/// lambda * low + (1 - lambda) * high, categorical cells are drawn from the
/// two rows with a seeded coin. Keys outside the foreign range take the
/// nearest endpoint row.
Table soft_join_two_way(const Table& base, const JoinCandidate& cand, std::uint64_t seed = 0);

/// Interpolation weight for x between y_low <= x <= y_high, clamped to [0,1].
double interpolation_weight(double x, double y_low, double y_high);

/// Dispatches on key kinds: hard-only candidates use left_join_hard,
/// candidates with a soft key use the requested soft method.
Table join_candidate(const Table& base, const JoinCandidate& cand, SoftJoinMethod soft, std::uint64_t seed = 0);

/// Full candidate execution as the pipeline runs it: keys with a target
/// granularity are truncated on both sides (the foreign side is resampled,
/// the base side matched through a temporary truncated copy), the foreign
/// table is pre-aggregated on its keys, then the hard or soft join runs.
/// The result holds the base columns unchanged plus the foreign payload.
Table execute_join(const Table& base, const JoinCandidate& cand, SoftJoinMethod soft, std::uint64_t seed = 0);

/// Truncates a datetime key to a coarser granularity and aggregates rows
/// sharing the truncated key (plus any extra grouping keys).
Table time_resample(const Table& foreign, const std::string& key, Granularity target,
                    std::span<const std::string> extra_keys = {});

/// |distinct base key tuples present in foreign| / |distinct base key tuples|
/// over the hard keys.
double intersection_score(const Table& base, const JoinCandidate& cand);

/// n_S / n_R. A candidate is pruned when this exceeds the chosen threshold.
double tuple_ratio(std::size_t base_rows, std::size_t foreign_key_domain);

/// Number of distinct key tuples on the foreign side.
std::size_t foreign_key_domain(const JoinCandidate& cand);

/// Numeric/datetime payload columns plus sum of min(cardinality, cap) over
/// categorical payload columns.
std::size_t estimate_feature_width(const JoinCandidate& cand, std::size_t max_cardinality = kDefaultMaxCardinality);

enum class JoinStrategy { table, budget, full_materialization };

std::string_view to_string(JoinStrategy strategy);
std::optional<JoinStrategy> parse_join_strategy(std::string_view text);

struct JoinPlan {
  std::vector<std::vector<JoinCandidate>> batches;
  JoinStrategy strategy = JoinStrategy::budget;
  std::size_t budget = 0;
};

/// Orders candidates by score (missing scores filled from key overlap),
/// then groups them per the strategy. Budget grouping is greedy first-fit on
/// estimated feature width; a candidate wider than the budget ships alone.
JoinPlan make_join_plan(const Table& base, std::vector<JoinCandidate> cands, JoinStrategy strategy,
                        std::size_t budget, std::size_t max_cardinality = kDefaultMaxCardinality);

/// First-fit grouping of widths in the given order; exposed for tests.
std::vector<std::vector<std::size_t>> first_fit_batches(std::span<const std::size_t> widths, std::size_t budget);

}  // namespace joinaug
