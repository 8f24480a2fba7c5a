#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "joinaug/error.hpp"
#include "joinaug/ranking.hpp"

namespace joinaug {

std::vector<std::size_t> RankingVector::order() const {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

void max_normalize(std::vector<double>& scores) {
  double top = 0.0;
  for (double s : scores) {
    if (!std::isfinite(s)) throw Error(ErrorKind::non_finite, "ranking score is not finite");
    top = std::max(top, s);
  }
  if (top <= 0.0) return;
  for (double& s : scores) s = std::max(0.0, s / top);
}

RankingVector rank_forest(const FeatureMatrix& x, const LabelVector& y, const ForestParams& params) {
  Model m = fit_forest(x, y, params);
  RankingVector r;
  r.scores.assign(m.importances().data(), m.importances().data() + m.importances().size());
  r.feature_ids = x.names;
  max_normalize(r.scores);
  return r;
}

RankingVector aggregate_ranking(const RankingVector& rf, const RankingVector& sr, double nu) {
  if (rf.size() != sr.size()) throw Error(ErrorKind::length_mismatch, "rankings differ in length");
  if (!(nu >= 0.0 && nu <= 1.0)) throw Error(ErrorKind::config, "nu must lie in [0,1]");
  std::vector<double> a = rf.scores, b = sr.scores;
  max_normalize(a);
  max_normalize(b);
  RankingVector out;
  out.feature_ids = rf.feature_ids.empty() ? sr.feature_ids : rf.feature_ids;
  out.scores.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.scores[i] = nu * a[i] + (1.0 - nu) * b[i];
  max_normalize(out.scores);
  return out;
}

namespace {

void finish_f_scores(std::vector<double>& f) {
  double top_finite = 0.0;
  bool any_inf = false;
  for (double v : f) {
    if (std::isinf(v))
      any_inf = true;
    else
      top_finite = std::max(top_finite, v);
  }
  if (any_inf) {
    double cap = top_finite > 0.0 ? 2.0 * top_finite : 1.0;
    for (double& v : f)
      if (std::isinf(v)) v = cap;
  }
  max_normalize(f);
}

}  // namespace

RankingVector rank_f_test(const FeatureMatrix& x, const LabelVector& y) {
  const Eigen::Index n = x.values.rows();
  if (static_cast<std::size_t>(n) != y.size()) throw Error(ErrorKind::length_mismatch, "rows differ from labels");
  const Eigen::Index d = x.values.cols();
  std::vector<double> f(static_cast<std::size_t>(d), 0.0);
  const double inf = std::numeric_limits<double>::infinity();

  for (Eigen::Index j = 0; j < d; ++j) {
    const auto col = x.values.col(j);
    const double mean = col.mean();
    const double total_ss = (col.array() - mean).square().sum();
    if (total_ss <= 1e-12 * std::max(1.0, mean * mean) * static_cast<double>(n)) continue;

    if (y.task == Task::classification) {
      const int k = std::max(y.num_classes, 1);
      std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
      std::vector<double> cnt(static_cast<std::size_t>(k), 0.0);
      for (Eigen::Index i = 0; i < n; ++i) {
        auto c = static_cast<std::size_t>(y.class_of(static_cast<std::size_t>(i)));
        sum[c] += col[i];
        cnt[c] += 1.0;
      }
      double between = 0.0;
      int groups = 0;
      for (std::size_t c = 0; c < sum.size(); ++c) {
        if (cnt[c] == 0) continue;
        ++groups;
        double gm = sum[c] / cnt[c];
        between += cnt[c] * (gm - mean) * (gm - mean);
      }
      if (groups < 2 || static_cast<Eigen::Index>(groups) >= n) continue;
      double within = std::max(0.0, total_ss - between);
      double df_b = groups - 1, df_w = static_cast<double>(n - groups);
      f[static_cast<std::size_t>(j)] = within <= 1e-12 * total_ss ? inf : (between / df_b) / (within / df_w);
    } else {
      if (n < 3) continue;
      const double ym = y.values.mean();
      const double syy = (y.values.array() - ym).square().sum();
      if (syy <= 0.0) continue;
      const double sxy = ((col.array() - mean) * (y.values.array() - ym)).sum();
      double r2 = sxy * sxy / (total_ss * syy);
      r2 = std::clamp(r2, 0.0, 1.0);
      f[static_cast<std::size_t>(j)] = r2 >= 1.0 - 1e-12 ? inf : r2 / (1.0 - r2) * static_cast<double>(n - 2);
    }
  }
  finish_f_scores(f);
  return {std::move(f), x.names};
}

std::vector<int> equal_frequency_bins(const Eigen::Ref<const Eigen::VectorXd>& values, std::size_t bins) {
  const auto n = static_cast<std::size_t>(values.size());
  if (bins < 1) throw Error(ErrorKind::config, "bins must be >= 1");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return values[static_cast<Eigen::Index>(a)] < values[static_cast<Eigen::Index>(b)];
  });
  std::vector<int> out(n);
  std::size_t first = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (r > 0 && values[static_cast<Eigen::Index>(idx[r])] != values[static_cast<Eigen::Index>(idx[r - 1])]) first = r;
    // A run of ties takes the bin of its first rank.
    out[idx[r]] = static_cast<int>(first * bins / n);
  }
  return out;
}

double mutual_information(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::length_mismatch, "codings differ in length");
  if (a.empty()) return 0.0;
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pa, pb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    pa[a[i]] += 1.0;
    pb[b[i]] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  double mi = 0.0;
  for (const auto& [key, c] : joint) mi += c / n * std::log(c * n / (pa[key.first] * pb[key.second]));
  return std::max(0.0, mi);
}

std::vector<double> mutual_info_scores(const FeatureMatrix& x, const LabelVector& y, std::size_t bins) {
  if (x.rows() != y.size()) throw Error(ErrorKind::length_mismatch, "rows differ from labels");
  std::vector<int> label_codes;
  if (y.task == Task::classification) {
    label_codes.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) label_codes[i] = y.class_of(i);
  } else {
    label_codes = equal_frequency_bins(y.values, bins);
  }
  std::vector<double> mi(x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j)
    mi[j] = mutual_information(equal_frequency_bins(x.values.col(static_cast<Eigen::Index>(j)), bins), label_codes);
  return mi;
}

RankingVector rank_mutual_info(const FeatureMatrix& x, const LabelVector& y, std::size_t bins) {
  RankingVector r{mutual_info_scores(x, y, bins), x.names};
  max_normalize(r.scores);
  return r;
}

}  // namespace joinaug
