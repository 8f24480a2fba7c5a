#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "joinaug/estimators.hpp"
#include "joinaug/tabular.hpp"

namespace joinaug {

/// Per-feature scores in [0,1], max-normalized when any score is positive.
struct RankingVector {
  std::vector<double> scores;
  std::vector<std::string> feature_ids;

  std::size_t size() const { return scores.size(); }
  /// Indices ordered by descending score, ties to the lower index.
  std::vector<std::size_t> order() const;
};

/// Divides by the maximum; leaves an all-zero vector untouched.
void max_normalize(std::vector<double>& scores);

RankingVector rank_forest(const FeatureMatrix& x, const LabelVector& y, const ForestParams& params);

struct SparseRegConfig {
  double gamma = 0.1;
  double smoothing = 1e-4;
  std::size_t max_iters = 500;
  double rel_tol = 1e-6;
  double armijo = 1e-4;     // sufficient-decrease constant
  double backtrack = 0.5;   // step shrink factor
  std::size_t max_backtracks = 60;
};

struct SparseRegResult {
  Eigen::MatrixXd weights;            // c x d, in standardized feature units
  std::vector<double> loss_history;   // loss at W=0 followed by every accepted step
  std::size_t iterations = 0;
  bool converged = false;
};

/// Minimizes sum_k sqrt(|R_{:,k}|^2 + s^2) + gamma * sum_i sqrt(|W_{:,i}|^2 + s^2),
/// R = X W^T - Y (one residual norm per output k over all samples),
/// from W = 0. Columns of `x` are standardized (constant columns are frozen at
/// zero weight); the target is centered, and one-hot encoded for
/// classification. Each step moves along the gradient preconditioned by the
/// quadratic majorizer of the smoothed norms, with Armijo backtracking.
SparseRegResult solve_sparse_regression(const Eigen::MatrixXd& x, const LabelVector& y, const SparseRegConfig& cfg);

/// Feature score = column norm of W, max-normalized.
RankingVector rank_sparse_regression(const FeatureMatrix& x, const LabelVector& y, const SparseRegConfig& cfg);

/// nu * rf + (1 - nu) * sr over max-normalized inputs, re-normalized.
RankingVector aggregate_ranking(const RankingVector& rf, const RankingVector& sr, double nu = 0.5);

/// One-way ANOVA F (classification) or univariate regression F, max-normalized.
/// A perfect separator (infinite F) scores 1 and finite scores are halved
/// relative to the largest finite one.
RankingVector rank_f_test(const FeatureMatrix& x, const LabelVector& y);

inline constexpr std::size_t kDefaultMiBins = 10;

/// Equal-frequency bin ids; tied values always share a bin.
std::vector<int> equal_frequency_bins(const Eigen::Ref<const Eigen::VectorXd>& values, std::size_t bins);

/// Plug-in mutual information in nats between two discrete codings.
double mutual_information(const std::vector<int>& a, const std::vector<int>& b);

/// Histogram MI(feature; label), max-normalized. Regression labels are
/// discretized like the features.
RankingVector rank_mutual_info(const FeatureMatrix& x, const LabelVector& y, std::size_t bins = kDefaultMiBins);

/// Unnormalized MI per feature (nats); rank_mutual_info normalizes these.
std::vector<double> mutual_info_scores(const FeatureMatrix& x, const LabelVector& y, std::size_t bins = kDefaultMiBins);

}  // namespace joinaug
