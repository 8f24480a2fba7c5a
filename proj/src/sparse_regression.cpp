#include <cmath>
#include <vector>

#include "joinaug/error.hpp"
#include "joinaug/ranking.hpp"

namespace joinaug {

namespace {

struct Problem {
  Eigen::MatrixXd z;  // n x a standardized active columns
  Eigen::MatrixXd y;  // n x c centered targets
  std::vector<Eigen::Index> active;
  double gamma;
  double s2;

  Eigen::MatrixXd gram;  // z^T z

  // The residual ZB - Y is n x c; its l2,1 norm in the d x n layout sums one
  // norm per output column.
  double loss(const Eigen::MatrixXd& b) const {
    Eigen::MatrixXd r = z * b - y;
    double f = (r.colwise().squaredNorm().array() + s2).sqrt().sum();
    f += gamma * (b.rowwise().squaredNorm().array() + s2).sqrt().sum();
    return f;
  }
};

Problem prepare(const Eigen::MatrixXd& x, const LabelVector& y, const SparseRegConfig& cfg) {
  const Eigen::Index n = x.rows();
  if (static_cast<std::size_t>(n) != y.size()) throw Error(ErrorKind::length_mismatch, "rows differ from labels");
  if (n < 1) throw Error(ErrorKind::bad_size, "sparse regression needs rows");
  if (cfg.gamma < 0.0) throw Error(ErrorKind::config, "gamma must be non-negative");
  if (!(cfg.smoothing > 0.0) || !(cfg.rel_tol > 0.0))
    throw Error(ErrorKind::config, "smoothing and rel_tol must be positive");
  if (!x.allFinite() || !y.values.allFinite()) throw Error(ErrorKind::non_finite, "input has non-finite entries");

  Problem p;
  p.gamma = cfg.gamma;
  p.s2 = cfg.smoothing * cfg.smoothing;
  const double nd = static_cast<double>(n);
  std::vector<Eigen::VectorXd> cols;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    const double sd = std::sqrt((x.col(j).array() - mean).square().sum() / nd);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) continue;
    p.active.push_back(j);
    cols.push_back((x.col(j).array() - mean) / sd);
  }
  p.z.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) p.z.col(static_cast<Eigen::Index>(k)) = cols[k];

  if (y.task == Task::classification) {
    p.y = Eigen::MatrixXd::Zero(n, std::max(y.num_classes, 1));
    for (Eigen::Index i = 0; i < n; ++i) p.y(i, y.class_of(static_cast<std::size_t>(i))) = 1.0;
  } else {
    p.y = y.values;
  }
  p.y = p.y.rowwise() - p.y.colwise().mean();
  p.gram = p.z.transpose() * p.z;
  return p;
}

}  // namespace

SparseRegResult solve_sparse_regression(const Eigen::MatrixXd& x, const LabelVector& y, const SparseRegConfig& cfg) {
  Problem p = prepare(x, y, cfg);
  const Eigen::Index a = p.z.cols();
  const Eigen::Index c = p.y.cols();

  SparseRegResult out;
  out.weights = Eigen::MatrixXd::Zero(c, x.cols());
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(a, c);  // transpose of the active part of W
  double f = p.loss(b);
  out.loss_history.push_back(f);
  if (a == 0) {
    out.converged = true;
    return out;
  }

  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    Eigen::MatrixXd r = p.z * b - p.y;
    Eigen::VectorXd wr = (r.colwise().squaredNorm().array() + p.s2).sqrt().inverse();
    Eigen::VectorXd wb = (b.rowwise().squaredNorm().array() + p.s2).sqrt().inverse();
    Eigen::MatrixXd grad = p.z.transpose() * r * wr.asDiagonal() + p.gamma * (wb.asDiagonal() * b);

    // The quadratic majorizer at b is block diagonal over outputs:
    // wr_j Z^T Z + gamma diag(wb). A tiny ridge keeps each block positive
    // definite when gamma = 0 and the design is rank deficient.
    Eigen::MatrixXd dir(a, c);
    for (Eigen::Index j = 0; j < c; ++j) {
      Eigen::MatrixXd h = wr[j] * p.gram;
      h.diagonal() += p.gamma * wb;
      h.diagonal().array() += 1e-12 * std::max(1.0, h.diagonal().mean());
      dir.col(j) = -Eigen::LDLT<Eigen::MatrixXd>(h).solve(grad.col(j));
    }
    if (!dir.allFinite()) throw Error(ErrorKind::non_finite, "sparse regression step overflowed");

    const double slope = (grad.array() * dir.array()).sum();
    if (!(slope < 0.0)) {
      out.converged = true;
      break;
    }
    double step = 1.0;
    bool accepted = false;
    double f_new = f;
    for (std::size_t bt = 0; bt < cfg.max_backtracks; ++bt) {
      f_new = p.loss(b + step * dir);
      if (!std::isfinite(f_new)) throw Error(ErrorKind::non_finite, "sparse regression loss overflowed");
      if (f_new <= f + cfg.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= cfg.backtrack;
    }
    if (!accepted) {
      out.converged = true;  // no representable decrease left
      break;
    }
    b += step * dir;
    out.loss_history.push_back(f_new);
    out.iterations = it + 1;
    const double change = f - f_new;
    f = f_new;
    if (change <= cfg.rel_tol * std::max(std::abs(f), 1e-300)) {
      out.converged = true;
      break;
    }
  }

  for (std::size_t k = 0; k < p.active.size(); ++k)
    out.weights.col(p.active[k]) = b.row(static_cast<Eigen::Index>(k)).transpose();
  return out;
}

RankingVector rank_sparse_regression(const FeatureMatrix& x, const LabelVector& y, const SparseRegConfig& cfg) {
  SparseRegResult res = solve_sparse_regression(x.values, y, cfg);
  RankingVector r;
  r.feature_ids = x.names;
  r.scores.resize(x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) r.scores[j] = res.weights.col(static_cast<Eigen::Index>(j)).norm();
  max_normalize(r.scores);
  return r;
}

}  // namespace joinaug
