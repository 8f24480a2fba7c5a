#include <algorithm>
#include <cmath>
#include <limits>

#include "joinaug/error.hpp"
#include "joinaug/estimators.hpp"

namespace joinaug {

Model Model::forest(std::vector<Tree> trees, Eigen::VectorXd importances, Task task, int num_classes,
                    std::size_t n_features) {
  Model m;
  m.kind_ = ModelKind::forest;
  m.task_ = task;
  m.num_classes_ = num_classes;
  m.n_features_ = n_features;
  m.trees_ = std::move(trees);
  m.importances_ = std::move(importances);
  return m;
}

Model Model::linear(Eigen::MatrixXd weights, Eigen::VectorXd bias, Task task, int num_classes) {
  Model m;
  m.kind_ = ModelKind::linear;
  m.task_ = task;
  m.num_classes_ = num_classes;
  m.n_features_ = static_cast<std::size_t>(weights.rows());
  m.importances_ = Eigen::VectorXd::Zero(weights.rows());
  m.weights_ = std::move(weights);
  m.bias_ = std::move(bias);
  return m;
}

Eigen::VectorXd Model::predict(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != n_features_)
    throw Error(ErrorKind::width_mismatch, "model expects " + std::to_string(n_features_) + " features, got " +
                                               std::to_string(x.cols()));
  const Eigen::Index n = x.rows();
  Eigen::VectorXd out(n);

  if (kind_ == ModelKind::linear) {
    Eigen::MatrixXd raw = (x * weights_).rowwise() + bias_.transpose();
    if (task_ == Task::regression) return raw.col(0);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      raw.row(i).maxCoeff(&best);  // first max wins
      out[i] = static_cast<double>(best);
    }
    return out;
  }

  if (trees_.empty()) throw Error(ErrorKind::config, "predict called on an unfitted model");
  if (task_ == Task::regression) {
    for (Eigen::Index i = 0; i < n; ++i) {
      auto row = x.row(i);
      double sum = 0.0;
      for (const auto& t : trees_) sum += t.predict(row);
      out[i] = sum / static_cast<double>(trees_.size());
    }
    return out;
  }
  std::vector<int> votes(static_cast<std::size_t>(std::max(num_classes_, 1)));
  for (Eigen::Index i = 0; i < n; ++i) {
    auto row = x.row(i);
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& t : trees_) ++votes[static_cast<std::size_t>(t.predict(row))];
    out[i] = static_cast<double>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return out;
}

Model fit_linear(const FeatureMatrix& x, const LabelVector& y) {
  const Eigen::Index n = x.values.rows();
  const Eigen::Index d = x.values.cols();
  if (static_cast<std::size_t>(n) != y.size()) throw Error(ErrorKind::length_mismatch, "rows differ from labels");
  if (n < 1) throw Error(ErrorKind::bad_size, "linear fit needs rows");
  const int c = y.task == Task::classification ? std::max(y.num_classes, 1) : 1;
  Eigen::MatrixXd targets(n, c);
  if (y.task == Task::classification) {
    targets.setZero();
    for (Eigen::Index i = 0; i < n; ++i) targets(i, y.class_of(static_cast<std::size_t>(i))) = 1.0;
  } else {
    targets.col(0) = y.values;
  }
  Eigen::RowVectorXd x_mean = x.values.colwise().mean();
  Eigen::RowVectorXd t_mean = targets.colwise().mean();
  Eigen::MatrixXd xc = x.values.rowwise() - x_mean;
  Eigen::MatrixXd tc = targets.rowwise() - t_mean;
  // Minimum-norm solution handles rank-deficient designs.
  Eigen::MatrixXd w = xc.completeOrthogonalDecomposition().solve(tc);
  Eigen::VectorXd bias = (t_mean - x_mean * w).transpose();
  (void)d;
  return Model::linear(std::move(w), std::move(bias), y.task, y.task == Task::classification ? c : 0);
}

Eigen::VectorXd predict(const Model& model, const FeatureMatrix& x) { return model.predict(x.values); }

double score_predictions(const Eigen::VectorXd& predictions, const LabelVector& y) {
  if (static_cast<std::size_t>(predictions.size()) != y.size())
    throw Error(ErrorKind::length_mismatch, "prediction count differs from label count");
  if (y.size() == 0) throw Error(ErrorKind::bad_size, "cannot score zero rows");
  if (y.task == Task::classification) {
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < predictions.size(); ++i)
      if (predictions[i] == y.values[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(y.size());
  }
  return -(predictions - y.values).cwiseAbs().mean();
}

double score(const Model& model, const Eigen::MatrixXd& x, const LabelVector& y) {
  return score_predictions(model.predict(x), y);
}

double score(const Model& model, const FeatureMatrix& x, const LabelVector& y) { return score(model, x.values, y); }

double constant_score(const LabelVector& train, const LabelVector& test) {
  if (train.size() == 0) throw Error(ErrorKind::bad_size, "constant predictor needs training rows");
  double value = 0.0;
  if (train.task == Task::classification) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(train.num_classes, 1)));
    for (std::size_t i = 0; i < train.size(); ++i) ++counts[static_cast<std::size_t>(train.class_of(i))];
    value = static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  } else {
    value = train.values.mean();
  }
  return score_predictions(Eigen::VectorXd::Constant(test.values.size(), value), test);
}

TunedForest fit_tuned_forest(const FeatureMatrix& x, const LabelVector& y, const ForestParams& base,
                             std::uint64_t seed, double inner_fraction) {
  const std::optional<std::size_t> grid[] = {8, 16, std::nullopt};
  ForestParams best_params = base;
  double best_score = -std::numeric_limits<double>::infinity();
  bool tuned = false;
  try {
    SplitRows rows = holdout_rows(y, inner_fraction, seed);
    Eigen::MatrixXd tx = x.select_rows(rows.train).values;
    Eigen::MatrixXd vx = x.select_rows(rows.test).values;
    LabelVector ty = y.select(rows.train);
    LabelVector vy = y.select(rows.test);
    for (const auto& depth : grid) {
      ForestParams p = base;
      p.max_depth = depth;
      double s = score(fit_forest(tx, ty, p), vx, vy);
      if (s > best_score) {
        best_score = s;
        best_params = p;
      }
    }
    tuned = true;
  } catch (const Error& e) {
    // Too few rows for an inner split: fall back to the given parameters.
    if (e.kind() != ErrorKind::degenerate_split && e.kind() != ErrorKind::bad_size) throw;
  }
  TunedForest out{fit_forest(x, y, best_params), best_params, tuned ? best_score : 0.0};
  return out;
}

}  // namespace joinaug
