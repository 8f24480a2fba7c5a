#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "joinaug/estimators.hpp"
#include "joinaug/ranking.hpp"
#include "joinaug/tabular.hpp"

namespace joinaug {

/// Distribution of injected features. moment_matched draws from a Gaussian
/// fitted to the real feature vectors; the others draw i.i.d. columns with
/// seeded parameters.
enum class NoiseMode { moment_matched, normal, uniform, bernoulli, poisson };

std::string_view to_string(NoiseMode mode);
std::optional<NoiseMode> parse_noise_mode(std::string_view text);

struct RifsConfig {
  double eta = 0.2;        // injected fraction: t = ceil(eta * d) columns
  std::size_t k = 10;      // repetitions
  double tau = 0.5;        // survival threshold for a single rifs_survival call
  std::vector<double> thresholds{0.1, 0.25, 0.5, 0.75, 0.9};
  double nu = 0.5;
  NoiseMode noise = NoiseMode::moment_matched;
  ForestParams forest;     // ranking forest; its seed is replaced per repetition
  SparseRegConfig sparse;
  std::uint64_t seed = 0;
};

std::size_t noise_count(std::size_t d, double eta);

struct NoisyMatrix {
  FeatureMatrix matrix;                    // [A | N]
  std::vector<std::size_t> noise_indices;  // columns of N inside matrix
};

/// Appends t noise columns after the real ones. Moment-matched noise samples
/// N(mu, Sigma) where mu is the per-row mean across features and Sigma the
/// covariance of the feature vectors, through at most min(d, 64) principal
/// directions.
NoisyMatrix inject_noise(const FeatureMatrix& x, std::size_t t, NoiseMode mode, std::uint64_t seed);

struct Repetition {
  std::vector<double> scores;  // aggregate ranking over the d + t columns
  std::vector<bool> survived;  // per real feature
};

struct SelectionResult {
  std::vector<std::size_t> selected;
  std::vector<double> survival;  // r*, multiples of 1/k
  double tau = 0.0;
  std::vector<Repetition> repetitions;
  std::vector<double> threshold_scores;  // wrapper: holdout score per threshold tried
};

/// S = {i : survival_i >= tau}, ascending.
std::vector<std::size_t> superlevel_set(const std::vector<double>& survival, double tau);

/// Survival frequencies over cfg.k repetitions; selected = superlevel set at cfg.tau.
SelectionResult rifs_survival(const FeatureMatrix& x, const LabelVector& y, const RifsConfig& cfg);

/// Scores a feature subset (column indices); larger is better.
using SubsetScorer = std::function<double(std::span<const std::size_t>)>;

/// Forest fit on the training part of a seeded holdout split of (x, y),
/// scored on its test part. The empty subset scores the constant predictor.
SubsetScorer holdout_scorer(const FeatureMatrix& x, const LabelVector& y, const ForestParams& params,
                            double test_fraction, std::uint64_t split_seed);

/// Threshold walk over precomputed survival frequencies: scores each
/// superlevel set in ascending threshold order and returns the subset before
/// the first strict decrease (or the last one). Empty subsets score -inf.
SelectionResult wrapper_from_survival(const SelectionResult& survival, std::span<const double> thresholds,
                                      const SubsetScorer& scorer);

/// rifs_survival once, then wrapper_from_survival over cfg.thresholds.
SelectionResult wrapper_select(const FeatureMatrix& x, const LabelVector& y, const RifsConfig& cfg,
                               const SubsetScorer& scorer);

struct SearchResult {
  std::size_t m = 0;                  // chosen prefix length
  std::vector<std::size_t> selected;  // first m entries of the order
  std::size_t evaluations = 0;        // distinct prefix lengths scored
  std::map<std::size_t, double> scores;
};

/// Doubling over prefix lengths 2, 4, 8, ... (capped at d) until the score
/// strictly drops, then a minimax bracket search over the last two doublings.
/// Candidates are prefix lengths min(2, d)..d. Returns the argmax prefix for
/// unimodal profiles (ties to the shorter one) and scores at most
/// 2 * ceil(log2 d) + 1 prefixes.
SearchResult exponential_search(std::size_t d, const std::function<double(std::size_t)>& prefix_score);

SearchResult exponential_search(const RankingVector& ranking, const SubsetScorer& scorer);

/// Greedy forward selection over the first max_rounds ranked features: a
/// feature is kept when it strictly improves the score of the current set.
std::vector<std::size_t> forward_selection(const RankingVector& ranking, const SubsetScorer& scorer,
                                           std::size_t max_rounds);

}  // namespace joinaug
