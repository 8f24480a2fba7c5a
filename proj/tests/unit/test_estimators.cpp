#include <gtest/gtest.h>

#include <random>

#include "joinaug/error.hpp"
#include "joinaug/estimators.hpp"
#include "joinaug/random.hpp"

using namespace joinaug;

namespace {

Eigen::MatrixXd normal(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

LabelVector regression(Eigen::VectorXd v) {
  LabelVector y;
  y.values = std::move(v);
  y.task = Task::regression;
  return y;
}

LabelVector classes(Eigen::VectorXd v, int k) {
  LabelVector y;
  y.values = std::move(v);
  y.task = Task::classification;
  y.num_classes = k;
  return y;
}

}  // namespace

TEST(Forest, ConstantTarget) {
  auto x = normal(50, 3, 1);
  auto m = fit_forest(x, regression(Eigen::VectorXd::Constant(50, 2.5)), ForestParams{});
  EXPECT_TRUE((m.predict(x).array() == 2.5).all());
  EXPECT_TRUE((m.importances().array() == 0.0).all());
}

TEST(Forest, SingleSplitSeparable) {
  auto x = normal(200, 2, 2);
  Eigen::VectorXd y = (x.col(0).array() > 0).cast<double>();
  ForestParams p;
  p.max_depth = 1;
  p.features_per_split = SplitFeatures::all;
  auto m = fit_forest(x, classes(y, 2), p);
  EXPECT_EQ(score(m, x, classes(y, 2)), 1.0);
}

TEST(Forest, PlantedFeatureMostImportant) {
  int wins = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto x = normal(100, 10, 1000 + s);
    ForestParams p;
    p.n_trees = 100;
    p.seed = s;
    auto m = fit_forest(x, regression(x.col(3)), p);
    Eigen::Index best;
    m.importances().maxCoeff(&best);
    wins += best == 3;
  }
  EXPECT_GE(wins, 95);
}

TEST(Forest, ImportancesFlatOnExchangeableFeatures) {
  // Equal-gain splits must not favour low column indices.
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(12);
  for (std::uint64_t s = 0; s < 40; ++s) {
    auto x = normal(200, 12, 50 + s);
    ForestParams p;
    p.seed = s;
    acc += fit_forest(x, regression(normal(200, 1, 900 + s).col(0)), p).importances();
  }
  acc /= 40;
  EXPECT_NEAR(acc.head(6).mean(), acc.tail(6).mean(), 0.01);
}

TEST(Forest, DeterministicPerSeed) {
  auto x = normal(80, 4, 3);
  ForestParams p;
  p.seed = 11;
  auto y = regression(x.col(0) + x.col(1));
  EXPECT_EQ(fit_forest(x, y, p).predict(x), fit_forest(x, y, p).predict(x));
}

TEST(Forest, ImportancesSumToOne) {
  auto x = normal(100, 5, 4);
  auto m = fit_forest(x, regression(x.col(0)), ForestParams{});
  EXPECT_NEAR(m.importances().sum(), 1.0, 1e-12);
}

TEST(Forest, InputErrors) {
  auto x = normal(10, 2, 5);
  EXPECT_THROW(fit_forest(x, regression(Eigen::VectorXd::Zero(9)), ForestParams{}), Error);
  Eigen::MatrixXd bad = x;
  bad(0, 0) = std::nan("");
  try {
    fit_forest(bad, regression(Eigen::VectorXd::Zero(10)), ForestParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::non_finite);
  }
}

TEST(Predict, SingleTreeLeaf) {
  auto x = normal(60, 2, 6);
  ForestParams p;
  p.n_trees = 1;
  auto m = fit_forest(x, regression(x.col(0)), p);
  Eigen::VectorXd pred = m.predict(x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) EXPECT_EQ(pred[i], m.trees()[0].predict(x.row(i)));
}

TEST(Predict, ForestAveragesTrees) {
  Tree a, b;
  a.nodes.push_back(TreeNode{-1, 0, -1, -1, 1.0});
  b.nodes.push_back(TreeNode{-1, 0, -1, -1, 3.0});
  auto m = Model::forest({a, b}, Eigen::VectorXd::Zero(1), Task::regression, 0, 1);
  EXPECT_EQ(m.predict(Eigen::MatrixXd::Zero(1, 1))[0], 2.0);
}

TEST(Predict, ZeroLinearModel) {
  auto m = Model::linear(Eigen::MatrixXd::Zero(3, 1), Eigen::VectorXd::Zero(1), Task::regression, 0);
  EXPECT_TRUE((m.predict(normal(5, 3, 7)).array() == 0.0).all());
}

TEST(Predict, WidthMismatch) {
  auto m = Model::linear(Eigen::MatrixXd::Zero(3, 1), Eigen::VectorXd::Zero(1), Task::regression, 0);
  try {
    m.predict(normal(5, 2, 7));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::width_mismatch);
  }
}

TEST(Linear, RecoversExactRelation) {
  FeatureMatrix x;
  x.values = normal(40, 2, 8);
  x.names = {"a", "b"};
  x.provenance = {"base", "base"};
  Eigen::VectorXd y = 2 * x.values.col(0) - x.values.col(1) + Eigen::VectorXd::Constant(40, 5);
  auto m = fit_linear(x, regression(y));
  EXPECT_NEAR(score(m, x, regression(y)), 0.0, 1e-9);
}

TEST(Score, Arithmetic) {
  EXPECT_EQ(score_predictions(Eigen::Vector2d(1, 1), regression(Eigen::Vector2d(0, 2))), -1.0);
  EXPECT_EQ(score_predictions(Eigen::Vector2d(0, 1), classes(Eigen::Vector2d(0, 1), 2)), 1.0);
  EXPECT_EQ(score_predictions(Eigen::Vector2d(3, 4), regression(Eigen::Vector2d(3, 4))), 0.0);
}

TEST(Score, CoinFlipAccuracy) {
  Rng rng = make_rng(9);
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXd pred(10000), truth(10000);
  for (Eigen::Index i = 0; i < 10000; ++i) {
    pred[i] = coin(rng);
    truth[i] = i % 2;
  }
  EXPECT_NEAR(score_predictions(pred, classes(truth, 2)), 0.5, 0.05);
}

TEST(Score, ConstantPredictor) {
  EXPECT_EQ(constant_score(regression(Eigen::Vector2d(0, 2)), regression(Eigen::Vector2d(1, 3))), -1.0);
  EXPECT_EQ(constant_score(classes(Eigen::Vector3d(1, 1, 0), 2), classes(Eigen::Vector2d(1, 0), 2)), 0.5);
}

TEST(Tuned, PicksFromGridAndIsDeterministic) {
  FeatureMatrix x;
  x.values = normal(150, 3, 10);
  x.names = {"a", "b", "c"};
  x.provenance.assign(3, "base");
  auto y = regression(x.values.col(0));
  ForestParams p;
  p.n_trees = 20;
  auto a = fit_tuned_forest(x, y, p, 4), b = fit_tuned_forest(x, y, p, 4);
  EXPECT_EQ(a.params.max_depth, b.params.max_depth);
  EXPECT_TRUE(!a.params.max_depth || *a.params.max_depth == 8 || *a.params.max_depth == 16);
  EXPECT_EQ(a.model.predict(x.values), b.model.predict(x.values));
}
