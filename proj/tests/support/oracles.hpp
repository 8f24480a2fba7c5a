#pragma once

// Reference computations written independently of the library code.

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace joinaug::testing {

/// P(Bin(k, p) >= m), summed directly from the pmf.
double binomial_tail(int k, double p, int m);

/// Smallest m in [first, d] maximizing score(m).
std::size_t prefix_argmax(std::size_t first, std::size_t d, const std::function<double(std::size_t)>& score);

/// Ordinary least squares without intercept via normal equations solved by
/// Householder QR; returns coefficients.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// Sum over groups of sqrt(||row||^2 + s^2) for rows of m, i.e. the smoothed
/// l2,1 norm of the transpose arrangement used by the solver tests.
double smoothed_l21(const Eigen::MatrixXd& m, double s);

}  // namespace joinaug::testing
