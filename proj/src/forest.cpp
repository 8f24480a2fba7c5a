#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "joinaug/error.hpp"
#include "joinaug/estimators.hpp"
#include "joinaug/random.hpp"

namespace joinaug {

std::size_t split_feature_count(SplitFeatures rule, Task task, std::size_t d) {
  if (rule == SplitFeatures::task_default)
    rule = task == Task::classification ? SplitFeatures::sqrt : SplitFeatures::third;
  std::size_t k = d;
  switch (rule) {
    case SplitFeatures::sqrt: k = static_cast<std::size_t>(std::sqrt(static_cast<double>(d))); break;
    case SplitFeatures::third: k = d / 3; break;
    case SplitFeatures::all:
    case SplitFeatures::task_default: k = d; break;
  }
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(d, 1));
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Per-feature row order by ascending value, shared by all trees of a forest.
struct SortedColumns {
  std::size_t n = 0;
  std::vector<std::uint32_t> rows;  // d segments of n row ids

  explicit SortedColumns(const Eigen::MatrixXd& x) : n(static_cast<std::size_t>(x.rows())) {
    const auto d = static_cast<std::size_t>(x.cols());
    rows.resize(n * d);
    for (std::size_t f = 0; f < d; ++f) {
      auto* seg = rows.data() + f * n;
      std::iota(seg, seg + n, 0u);
      const double* col = x.data() + f * n;
      std::stable_sort(seg, seg + n, [&](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
    }
  }
};

// Grows one CART tree. The bootstrap sample is held as in-bag rows with
// multiplicities. Each feature keeps the node's rows in ascending value
// order; a split stably partitions every order so node ranges stay sorted.
//
// Impurity bookkeeping works in "proxy" form: sum^2/n for regression and
// sum_k count_k^2/n for Gini, with n counting bootstrap copies. The weighted
// impurity decrease of a split is proxy(left) + proxy(right) - proxy(parent).
class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const LabelVector& y, const SortedColumns& sorted, const ForestParams& params,
              Rng& rng, Eigen::VectorXd& importance)
      : x_(x),
        y_(y),
        sorted_(sorted),
        params_(params),
        rng_(rng),
        importance_(importance),
        classification_(y.task == Task::classification),
        num_classes_(std::max(y.num_classes, 1)),
        d_(static_cast<std::size_t>(x.cols())),
        mtry_(split_feature_count(params.features_per_split, y.task, d_)),
        feature_pool_(d_) {
    std::iota(feature_pool_.begin(), feature_pool_.end(), 0);
    left_counts_.resize(static_cast<std::size_t>(num_classes_));
    right_counts_.resize(static_cast<std::size_t>(num_classes_));
  }

  /// copies[r] = number of times row r was drawn.
  Tree build(const std::vector<std::uint32_t>& copies) {
    const std::size_t n = sorted_.n;
    copies_ = &copies;
    in_bag_ = 0;
    for (auto c : copies) in_bag_ += c > 0;
    order_.resize(in_bag_ * d_);
    for (std::size_t f = 0; f < d_; ++f) {
      const auto* src = sorted_.rows.data() + f * n;
      auto* dst = order_.data() + f * in_bag_;
      for (std::size_t i = 0; i < n; ++i)
        if (copies[src[i]]) *dst++ = src[i];
    }
    goes_left_.assign(n, 0);
    scratch_.resize(in_bag_);

    Tree tree;
    struct Pending {
      std::size_t begin, end, depth;
      int node;
    };
    tree.nodes.emplace_back();
    std::vector<Pending> stack{{0, in_bag_, 0, 0}};
    while (!stack.empty()) {
      Pending p = stack.back();
      stack.pop_back();
      double weight = 0.0;
      tree.nodes[static_cast<std::size_t>(p.node)].value = leaf_value(p.begin, p.end, weight);

      bool depth_ok = !params_.max_depth || p.depth < *params_.max_depth;
      if (!depth_ok || weight < static_cast<double>(std::max<std::size_t>(params_.min_samples_split, 2)) ||
          is_pure(p.begin, p.end))
        continue;
      SplitChoice split = best_split(p.begin, p.end);
      if (split.feature < 0) continue;

      const std::size_t mid = partition(p.begin, p.end, split);
      if (mid == p.begin || mid == p.end) continue;

      importance_[split.feature] += split.gain;
      int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[static_cast<std::size_t>(p.node)];
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.left = left;
      node.right = left + 1;
      // Right first so the left subtree is expanded first (stable node order).
      stack.push_back({mid, p.end, p.depth + 1, left + 1});
      stack.push_back({p.begin, mid, p.depth + 1, left});
    }
    return tree;
  }

 private:
  double target(std::uint32_t r) const { return y_.values[static_cast<Eigen::Index>(r)]; }
  double copies(std::uint32_t r) const { return static_cast<double>((*copies_)[r]); }

  // Any feature's segment lists the node's rows; feature 0 is used.
  const std::uint32_t* members(std::size_t begin) const { return order_.data() + begin; }

  double leaf_value(std::size_t begin, std::size_t end, double& weight) {
    const auto* rows = members(begin);
    const std::size_t m = end - begin;
    weight = 0.0;
    if (!classification_) {
      double sum = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        sum += copies(rows[i]) * target(rows[i]);
        weight += copies(rows[i]);
      }
      return sum / weight;
    }
    std::fill(left_counts_.begin(), left_counts_.end(), 0);
    for (std::size_t i = 0; i < m; ++i) {
      left_counts_[static_cast<std::size_t>(target(rows[i]))] += (*copies_)[rows[i]];
      weight += copies(rows[i]);
    }
    auto best = std::max_element(left_counts_.begin(), left_counts_.end());  // first max = smaller id
    return static_cast<double>(best - left_counts_.begin());
  }

  bool is_pure(std::size_t begin, std::size_t end) const {
    const auto* rows = members(begin);
    double first = target(rows[0]);
    for (std::size_t i = 1; i < end - begin; ++i)
      if (target(rows[i]) != first) return false;
    return true;
  }

  std::size_t partition(std::size_t begin, std::size_t end, const SplitChoice& split) {
    const auto f = static_cast<Eigen::Index>(split.feature);
    const auto* rows = members(begin);
    std::size_t left_count = 0;
    for (std::size_t i = 0; i < end - begin; ++i) {
      bool left = x_(static_cast<Eigen::Index>(rows[i]), f) <= split.threshold;
      goes_left_[rows[i]] = left;
      left_count += left;
    }
    for (std::size_t g = 0; g < d_; ++g) {
      auto* seg = order_.data() + g * in_bag_;
      std::size_t l = begin, r = 0;
      for (std::size_t i = begin; i < end; ++i) {
        std::uint32_t q = seg[i];
        if (goes_left_[q])
          seg[l++] = q;
        else
          scratch_[r++] = q;
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(r), seg + l);
    }
    return begin + left_count;
  }

  SplitChoice best_split(std::size_t begin, std::size_t end) {
    // Partial Fisher-Yates: the first mtry_ slots become this node's candidates.
    // They are visited in draw order, so equal-gain splits (common in small
    // nodes) go to a random feature rather than the lowest index.
    for (std::size_t i = 0; i < mtry_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, d_ - 1);
      std::swap(feature_pool_[i], feature_pool_[pick(rng_)]);
    }
    candidates_.assign(feature_pool_.begin(), feature_pool_.begin() + static_cast<std::ptrdiff_t>(mtry_));

    const std::size_t m = end - begin;
    const auto* all = members(begin);
    double weight = 0.0;
    double parent_proxy = 0.0;
    double total = 0.0;
    if (classification_) {
      std::fill(right_counts_.begin(), right_counts_.end(), 0);
      for (std::size_t i = 0; i < m; ++i) {
        right_counts_[static_cast<std::size_t>(target(all[i]))] += (*copies_)[all[i]];
        weight += copies(all[i]);
      }
      double sq = 0.0;
      for (auto c : right_counts_) sq += static_cast<double>(c) * static_cast<double>(c);
      parent_proxy = sq / weight;
      parent_counts_ = right_counts_;
    } else {
      for (std::size_t i = 0; i < m; ++i) {
        total += copies(all[i]) * target(all[i]);
        weight += copies(all[i]);
      }
      parent_proxy = total * total / weight;
    }

    SplitChoice best;
    double best_proxy = parent_proxy;
    const double min_gain = 1e-12 * std::max(1.0, std::abs(parent_proxy));
    for (std::size_t f : candidates_) {
      const auto* seg = order_.data() + f * in_bag_ + begin;
      const double* col = x_.data() + f * static_cast<std::size_t>(x_.rows());
      if (col[seg[0]] == col[seg[m - 1]]) continue;

      double here = col[seg[0]];
      double nl = 0.0;
      if (classification_) {
        std::fill(left_counts_.begin(), left_counts_.end(), 0);
        right_counts_ = parent_counts_;
        double sql = 0.0, sqr = parent_proxy * weight;
        for (std::size_t i = 0; i + 1 < m; ++i) {
          auto k = static_cast<std::size_t>(target(seg[i]));
          const long w = static_cast<long>((*copies_)[seg[i]]);
          const double wd = static_cast<double>(w);
          sql += wd * (2.0 * static_cast<double>(left_counts_[k]) + wd);
          sqr -= wd * (2.0 * static_cast<double>(right_counts_[k]) - wd);
          left_counts_[k] += w;
          right_counts_[k] -= w;
          nl += wd;
          double next = col[seg[i + 1]];
          if (here == next) continue;
          double proxy = sql / nl + sqr / (weight - nl);
          if (proxy > best_proxy) {
            best_proxy = proxy;
            best.feature = static_cast<int>(f);
            best.threshold = midpoint(here, next);
          }
          here = next;
        }
      } else {
        double left_sum = 0.0;
        for (std::size_t i = 0; i + 1 < m; ++i) {
          const double wd = copies(seg[i]);
          left_sum += wd * target(seg[i]);
          nl += wd;
          double next = col[seg[i + 1]];
          if (here == next) continue;
          double right_sum = total - left_sum;
          double proxy = left_sum * left_sum / nl + right_sum * right_sum / (weight - nl);
          if (proxy > best_proxy) {
            best_proxy = proxy;
            best.feature = static_cast<int>(f);
            best.threshold = midpoint(here, next);
          }
          here = next;
        }
      }
    }
    best.gain = best_proxy - parent_proxy;
    if (best.gain <= min_gain) best.feature = -1;
    return best;
  }

  static double midpoint(double a, double b) {
    double mid = a + (b - a) / 2.0;
    return mid < b ? mid : a;
  }

  const Eigen::MatrixXd& x_;
  const LabelVector& y_;
  const SortedColumns& sorted_;
  const ForestParams& params_;
  Rng& rng_;
  Eigen::VectorXd& importance_;
  bool classification_;
  int num_classes_;
  std::size_t d_;
  std::size_t mtry_;
  std::size_t in_bag_ = 0;
  const std::vector<std::uint32_t>* copies_ = nullptr;
  std::vector<std::size_t> feature_pool_;
  std::vector<std::size_t> candidates_;
  std::vector<std::uint32_t> order_;  // d segments of in-bag row ids
  std::vector<std::uint32_t> scratch_;
  std::vector<char> goes_left_;
  std::vector<long> left_counts_, right_counts_, parent_counts_;
};

}  // namespace

Model fit_forest(const Eigen::MatrixXd& x, const LabelVector& y, const ForestParams& params) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  if (n != y.size()) throw Error(ErrorKind::length_mismatch, "feature rows differ from label length");
  if (n < 2) throw Error(ErrorKind::bad_size, "forest needs at least 2 rows");
  if (d < 1) throw Error(ErrorKind::no_features, "forest needs at least 1 feature");
  if (params.n_trees < 1) throw Error(ErrorKind::config, "n_trees must be >= 1");
  if (params.max_depth && *params.max_depth < 1) throw Error(ErrorKind::config, "max_depth must be >= 1");
  if (!x.allFinite()) throw Error(ErrorKind::non_finite, "feature matrix has non-finite entries");

  std::vector<Tree> trees;
  trees.reserve(params.n_trees);
  Eigen::VectorXd importances = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  Eigen::VectorXd tree_gain(static_cast<Eigen::Index>(d));
  const SortedColumns sorted(x);
  std::vector<std::uint32_t> copies(n);

  for (std::size_t t = 0; t < params.n_trees; ++t) {
    auto rng = make_rng(params.seed, {0xf0e57, t});
    std::uniform_int_distribution<std::size_t> draw(0, n - 1);
    std::fill(copies.begin(), copies.end(), 0u);
    for (std::size_t i = 0; i < n; ++i) ++copies[draw(rng)];
    tree_gain.setZero();
    TreeBuilder builder(x, y, sorted, params, rng, tree_gain);
    Tree tree = builder.build(copies);
    for (std::size_t r = 0; r < n; ++r)
      if (!copies[r]) tree.oob_rows.push_back(r);
    double s = tree_gain.sum();
    if (s > 0) importances += tree_gain / s;
    trees.push_back(std::move(tree));
  }
  double total = importances.sum();
  if (total > 0) importances /= total;
  return Model::forest(std::move(trees), std::move(importances), y.task, y.num_classes, d);
}

Model fit_forest(const FeatureMatrix& x, const LabelVector& y, const ForestParams& params) {
  return fit_forest(x.values, y, params);
}

}  // namespace joinaug
