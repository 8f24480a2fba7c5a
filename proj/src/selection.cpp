#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "joinaug/error.hpp"
#include "joinaug/random.hpp"
#include "joinaug/selection.hpp"

namespace joinaug {

std::string_view to_string(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::moment_matched: return "moment_matched";
    case NoiseMode::normal: return "normal";
    case NoiseMode::uniform: return "uniform";
    case NoiseMode::bernoulli: return "bernoulli";
    case NoiseMode::poisson: return "poisson";
  }
  return "moment_matched";
}

std::optional<NoiseMode> parse_noise_mode(std::string_view text) {
  for (auto m : {NoiseMode::moment_matched, NoiseMode::normal, NoiseMode::uniform, NoiseMode::bernoulli,
                 NoiseMode::poisson})
    if (text == to_string(m)) return m;
  return std::nullopt;
}

std::size_t noise_count(std::size_t d, double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw Error(ErrorKind::config, "eta must lie in (0,1]");
  // Guard against 0.2 * 10 landing a hair above 2.
  double t = std::ceil(eta * static_cast<double>(d) - 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(t));
}

namespace {

constexpr std::size_t kMaxNoiseRank = 64;

Eigen::MatrixXd moment_matched_noise(const Eigen::MatrixXd& a, std::size_t t, Rng& rng) {
  const Eigen::Index n = a.rows();
  const Eigen::Index d = a.cols();
  Eigen::VectorXd mu = a.rowwise().mean();
  Eigen::MatrixXd c = a.colwise() - mu;
  // Sigma = C C^T / d shares its nonzero spectrum with the d x d Gram matrix,
  // so samples are mu + C V z / sqrt(d) with z standard normal.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.transpose() * c);
  const Eigen::VectorXd& lambda = eig.eigenvalues();  // ascending
  const double top = lambda.size() ? std::max(0.0, lambda[lambda.size() - 1]) : 0.0;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = d - 1; i >= 0 && keep.size() < kMaxNoiseRank; --i)
    if (lambda[i] > 1e-8 * std::max(1.0, top)) keep.push_back(i);

  Eigen::MatrixXd basis(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k)
    basis.col(static_cast<Eigen::Index>(k)) = c * eig.eigenvectors().col(keep[k]) / std::sqrt(static_cast<double>(d));

  std::normal_distribution<double> normal;
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(t));
  Eigen::VectorXd z(basis.cols());
  for (std::size_t j = 0; j < t; ++j) {
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = normal(rng);
    out.col(static_cast<Eigen::Index>(j)) = mu + basis * z;
  }
  return out;
}

Eigen::MatrixXd standard_noise(Eigen::Index n, std::size_t t, NoiseMode mode, Rng& rng) {
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(t));
  for (std::size_t j = 0; j < t; ++j) {
    auto col = out.col(static_cast<Eigen::Index>(j));
    switch (mode) {
      case NoiseMode::normal: {
        std::normal_distribution<double> dist;
        for (Eigen::Index i = 0; i < n; ++i) col[i] = dist(rng);
        break;
      }
      case NoiseMode::uniform: {
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        for (Eigen::Index i = 0; i < n; ++i) col[i] = dist(rng);
        break;
      }
      case NoiseMode::bernoulli: {
        double p = std::uniform_real_distribution<double>(0.2, 0.8)(rng);
        std::bernoulli_distribution dist(p);
        for (Eigen::Index i = 0; i < n; ++i) col[i] = dist(rng) ? 1.0 : 0.0;
        break;
      }
      case NoiseMode::poisson: {
        double lambda = std::uniform_real_distribution<double>(1.0, 5.0)(rng);
        std::poisson_distribution<int> dist(lambda);
        for (Eigen::Index i = 0; i < n; ++i) col[i] = dist(rng);
        break;
      }
      case NoiseMode::moment_matched: break;
    }
  }
  return out;
}

}  // namespace

NoisyMatrix inject_noise(const FeatureMatrix& x, std::size_t t, NoiseMode mode, std::uint64_t seed) {
  if (x.cols() == 0) throw Error(ErrorKind::no_features, "cannot inject noise next to zero features");
  if (!x.values.allFinite()) throw Error(ErrorKind::non_finite, "feature matrix has non-finite entries");
  auto rng = make_rng(seed, {0x401e});
  Eigen::MatrixXd noise = mode == NoiseMode::moment_matched ? moment_matched_noise(x.values, t, rng)
                                                            : standard_noise(x.values.rows(), t, mode, rng);
  if (!noise.allFinite()) throw Error(ErrorKind::non_finite, "injected noise is not finite");

  NoisyMatrix out;
  const Eigen::Index d = x.values.cols();
  out.matrix.values.resize(x.values.rows(), d + static_cast<Eigen::Index>(t));
  out.matrix.values.leftCols(d) = x.values;
  out.matrix.values.rightCols(static_cast<Eigen::Index>(t)) = noise;
  out.matrix.names = x.names;
  out.matrix.provenance = x.provenance;
  out.matrix.provenance.resize(x.cols());
  for (std::size_t j = 0; j < t; ++j) {
    out.noise_indices.push_back(x.cols() + j);
    out.matrix.names.push_back("__noise_" + std::to_string(j));
    out.matrix.provenance.push_back("__noise");
  }
  return out;
}

std::vector<std::size_t> superlevel_set(const std::vector<double>& survival, double tau) {
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i < survival.size(); ++i)
    if (survival[i] >= tau - 1e-12) s.push_back(i);
  return s;
}

SelectionResult rifs_survival(const FeatureMatrix& x, const LabelVector& y, const RifsConfig& cfg) {
  if (cfg.k < 1) throw Error(ErrorKind::config, "k must be >= 1");
  if (!(cfg.tau >= 0.0 && cfg.tau <= 1.0)) throw Error(ErrorKind::config, "tau must lie in [0,1]");
  const std::size_t d = x.cols();
  const std::size_t t = noise_count(d, cfg.eta);

  SelectionResult out;
  out.tau = cfg.tau;
  std::vector<std::size_t> wins(d, 0);
  for (std::size_t rep = 0; rep < cfg.k; ++rep) {
    const std::uint64_t rep_seed = derive_seed(cfg.seed, {0x41f5, rep});
    NoisyMatrix noisy = inject_noise(x, t, cfg.noise, derive_seed(rep_seed, {1}));
    ForestParams fp = cfg.forest;
    fp.seed = derive_seed(rep_seed, {2});
    RankingVector rf = rank_forest(noisy.matrix, y, fp);
    RankingVector sr = rank_sparse_regression(noisy.matrix, y, cfg.sparse);
    RankingVector agg = aggregate_ranking(rf, sr, cfg.nu);

    double best_noise = -std::numeric_limits<double>::infinity();
    for (std::size_t j : noisy.noise_indices) best_noise = std::max(best_noise, agg.scores[j]);
    Repetition r;
    r.scores = agg.scores;
    r.survived.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      // Real features rank ahead of noise on ties.
      r.survived[i] = agg.scores[i] >= best_noise;
      wins[i] += r.survived[i];
    }
    out.repetitions.push_back(std::move(r));
  }
  out.survival.resize(d);
  for (std::size_t i = 0; i < d; ++i) out.survival[i] = static_cast<double>(wins[i]) / static_cast<double>(cfg.k);
  out.selected = superlevel_set(out.survival, cfg.tau);
  return out;
}

SubsetScorer holdout_scorer(const FeatureMatrix& x, const LabelVector& y, const ForestParams& params,
                            double test_fraction, std::uint64_t split_seed) {
  SplitRows rows = holdout_rows(y, test_fraction, split_seed);
  auto train_x = std::make_shared<FeatureMatrix>(x.select_rows(rows.train));
  auto test_x = std::make_shared<FeatureMatrix>(x.select_rows(rows.test));
  auto train_y = std::make_shared<LabelVector>(y.select(rows.train));
  auto test_y = std::make_shared<LabelVector>(y.select(rows.test));
  return [=](std::span<const std::size_t> cols) {
    if (cols.empty()) return constant_score(*train_y, *test_y);
    Model m = fit_forest(train_x->select_columns(cols), *train_y, params);
    return score(m, test_x->select_columns(cols), *test_y);
  };
}

SelectionResult wrapper_from_survival(const SelectionResult& survival, std::span<const double> thresholds,
                                      const SubsetScorer& scorer) {
  if (thresholds.empty()) throw Error(ErrorKind::config, "threshold schedule is empty");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] >= 0.0 && thresholds[i] <= 1.0)) throw Error(ErrorKind::config, "thresholds must lie in [0,1]");
    if (i > 0 && thresholds[i] < thresholds[i - 1]) throw Error(ErrorKind::config, "thresholds must be ascending");
  }
  SelectionResult out = survival;
  out.threshold_scores.clear();
  double previous = 0.0;
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    std::vector<std::size_t> subset = superlevel_set(survival.survival, thresholds[i]);
    double s = subset.empty() ? -std::numeric_limits<double>::infinity() : scorer(subset);
    out.threshold_scores.push_back(s);
    if (i > 0 && s < previous) return out;  // keeps the previous threshold's subset
    out.selected = std::move(subset);
    out.tau = thresholds[i];
    previous = s;
  }
  return out;
}

SelectionResult wrapper_select(const FeatureMatrix& x, const LabelVector& y, const RifsConfig& cfg,
                               const SubsetScorer& scorer) {
  return wrapper_from_survival(rifs_survival(x, y, cfg), cfg.thresholds, scorer);
}

std::vector<std::size_t> forward_selection(const RankingVector& ranking, const SubsetScorer& scorer,
                                           std::size_t max_rounds) {
  std::vector<std::size_t> selected;
  if (max_rounds == 0 || ranking.size() == 0) return selected;
  const std::vector<std::size_t> order = ranking.order();
  double current = scorer(selected);
  for (std::size_t r = 0; r < std::min(max_rounds, order.size()); ++r) {
    std::vector<std::size_t> trial = selected;
    trial.push_back(order[r]);
    double s = scorer(trial);
    if (s > current) {
      selected = std::move(trial);
      current = s;
    }
  }
  return selected;
}

}  // namespace joinaug
