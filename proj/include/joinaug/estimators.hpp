#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "joinaug/tabular.hpp"

namespace joinaug {

/// Candidate features examined at each split. task_default is sqrt(d) for
/// classification and d/3 (at least 1) for regression.
enum class SplitFeatures { task_default, sqrt, third, all };

struct ForestParams {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;  // unlimited when empty
  std::size_t min_samples_split = 2;
  SplitFeatures features_per_split = SplitFeatures::task_default;
  std::uint64_t seed = 0;
};

std::size_t split_feature_count(SplitFeatures rule, Task task, std::size_t d);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf mean (regression) or majority class id
};

struct Tree {
  std::vector<TreeNode> nodes;
  std::vector<std::size_t> oob_rows;  // training rows absent from the bootstrap sample

  template <typename Row>
  double predict(const Row& row) const {
    int at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(at)];
      at = row(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
  }
};

enum class ModelKind { forest, linear };

/// A fitted estimator. Immutable after fit; the feature width is fixed.
class Model {
 public:
  static Model forest(std::vector<Tree> trees, Eigen::VectorXd importances, Task task, int num_classes,
                      std::size_t n_features);
  /// weights: d x c (c = 1 for regression), bias: length c.
  static Model linear(Eigen::MatrixXd weights, Eigen::VectorXd bias, Task task, int num_classes);

  ModelKind kind() const { return kind_; }
  Task task() const { return task_; }
  int num_classes() const { return num_classes_; }
  std::size_t n_features() const { return n_features_; }
  const std::vector<Tree>& trees() const { return trees_; }
  /// Mean decrease in impurity, normalized to sum 1 (all zero when no tree split).
  const Eigen::VectorXd& importances() const { return importances_; }
  const Eigen::MatrixXd& weights() const { return weights_; }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;

 private:
  ModelKind kind_ = ModelKind::forest;
  Task task_ = Task::regression;
  int num_classes_ = 0;
  std::size_t n_features_ = 0;
  std::vector<Tree> trees_;
  Eigen::VectorXd importances_;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd bias_;
};

Model fit_forest(const Eigen::MatrixXd& x, const LabelVector& y, const ForestParams& params);
Model fit_forest(const FeatureMatrix& x, const LabelVector& y, const ForestParams& params);

/// Least squares with intercept; classification fits one-hot targets and
/// predicts the arg-max column.
Model fit_linear(const FeatureMatrix& x, const LabelVector& y);

Eigen::VectorXd predict(const Model& model, const FeatureMatrix& x);

/// Accuracy for classification, negative mean absolute error for regression:
/// larger is better for both.
double score(const Model& model, const FeatureMatrix& x, const LabelVector& y);
double score(const Model& model, const Eigen::MatrixXd& x, const LabelVector& y);
double score_predictions(const Eigen::VectorXd& predictions, const LabelVector& y);

/// Score of the best constant predictor fitted on `train` (mean or majority
/// class), evaluated on `test`. Used when a feature subset is empty.
double constant_score(const LabelVector& train, const LabelVector& test);

struct TunedForest {
  Model model;
  ForestParams params;
  double inner_score = 0.0;
};

/// Picks max_depth from {8, 16, unlimited} by an inner holdout on the
/// training rows (ties favour the shallower tree), then refits on all rows.
TunedForest fit_tuned_forest(const FeatureMatrix& x, const LabelVector& y, const ForestParams& base,
                             std::uint64_t seed, double inner_fraction = 0.2);

}  // namespace joinaug
