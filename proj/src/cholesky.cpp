#include "ocksr/cholesky.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ocksr/errors.hpp"

namespace ocksr {

namespace {

void check_length(std::size_t got, std::size_t want) {
  if (got != want) {
    throw DataError("vector length " + std::to_string(got) + " does not match factor order " +
                    std::to_string(want));
  }
}

}  // namespace

CholeskyFactor CholeskyFactor::factor_batch(const Eigen::MatrixXd& K) {
  if (K.rows() != K.cols()) throw DataError("Cholesky input must be square");
  const auto n = static_cast<std::size_t>(K.rows());

  CholeskyFactor f;
  f.order_ = n;
  f.data_.assign(offset(n), 0.0);
  f.abs_row_sums_.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto a = static_cast<Eigen::Index>(std::min(i, j));
      const auto b = static_cast<Eigen::Index>(std::max(i, j));
      f.abs_row_sums_[i] += std::abs(K(a, b));
    }
  }
  const double norm = n ? *std::max_element(f.abs_row_sums_.begin(), f.abs_row_sums_.end()) : 0.0;
  const double tol = kPivotEpsilon * norm;

  // Column-by-column (up-looking) elimination; identical arithmetic to
  // repeated `extend`, so the two paths agree to rounding.
  for (std::size_t j = 0; j < n; ++j) {
    double* col = f.data_.data() + offset(j);
    double sq = 0.0;
    for (std::size_t i = 0; i < j; ++i) {
      const double* ci = f.data_.data() + offset(i);
      double acc = K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      for (std::size_t k = 0; k < i; ++k) acc -= ci[k] * col[k];
      col[i] = acc / ci[i];
      sq += col[i] * col[i];
    }
    const double pivot = K(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) - sq;
    if (!(pivot > tol)) throw NotPositiveDefinite(j);
    col[j] = std::sqrt(pivot);
  }
  return f;
}

CholeskyFactor CholeskyFactor::factor_init(double k11) {
  if (!(k11 > 0.0) || !std::isfinite(k11)) throw NotPositiveDefinite(0);
  CholeskyFactor f;
  f.order_ = 1;
  f.data_ = {std::sqrt(k11)};
  f.abs_row_sums_ = {k11};
  return f;
}

void CholeskyFactor::extend(std::span<const double> k_new, double k_diag) {
  check_length(k_new.size(), order_);
  const std::size_t m = order_;

  std::vector<double> sums = abs_row_sums_;
  double new_sum = std::abs(k_diag);
  for (std::size_t i = 0; i < m; ++i) {
    sums[i] += std::abs(k_new[i]);
    new_sum += std::abs(k_new[i]);
  }
  sums.push_back(new_sum);
  const double tol = kPivotEpsilon * *std::max_element(sums.begin(), sums.end());

  // Forward substitution R^T r = k_new, written straight into the new column.
  const std::size_t start = data_.size();
  data_.resize(start + m + 1);
  double* col = data_.data() + start;
  double sq = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double* ci = data_.data() + offset(i);
    double acc = k_new[i];
    for (std::size_t k = 0; k < i; ++k) acc -= ci[k] * col[k];
    col[i] = acc / ci[i];
    sq += col[i] * col[i];
  }
  const double pivot = k_diag - sq;
  if (!(pivot > tol)) {
    data_.resize(start);
    throw NotPositiveDefinite(m);
  }
  col[m] = std::sqrt(pivot);
  abs_row_sums_ = std::move(sums);
  ++order_;
}

Eigen::VectorXd CholeskyFactor::solve_lower_transposed(const Eigen::VectorXd& b) const {
  check_length(static_cast<std::size_t>(b.size()), order_);
  Eigen::VectorXd theta(b.size());
  for (std::size_t i = 0; i < order_; ++i) {
    const double* ci = data_.data() + offset(i);
    double acc = b(static_cast<Eigen::Index>(i));
    for (std::size_t k = 0; k < i; ++k) acc -= ci[k] * theta(static_cast<Eigen::Index>(k));
    theta(static_cast<Eigen::Index>(i)) = acc / ci[i];
  }
  return theta;
}

Eigen::VectorXd CholeskyFactor::solve_upper(const Eigen::VectorXd& theta) const {
  check_length(static_cast<std::size_t>(theta.size()), order_);
  // Column-oriented back substitution so that only contiguous columns are read.
  Eigen::VectorXd alpha = theta;
  for (std::size_t j = order_; j-- > 0;) {
    const double* cj = data_.data() + offset(j);
    const double a = alpha(static_cast<Eigen::Index>(j)) / cj[j];
    alpha(static_cast<Eigen::Index>(j)) = a;
    for (std::size_t i = 0; i < j; ++i) alpha(static_cast<Eigen::Index>(i)) -= cj[i] * a;
  }
  return alpha;
}

Eigen::VectorXd CholeskyFactor::solve(const Eigen::VectorXd& b) const {
  return solve_upper(solve_lower_transposed(b));
}

Eigen::MatrixXd CholeskyFactor::upper() const {
  const auto n = static_cast<Eigen::Index>(order_);
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t j = 0; j < order_; ++j) {
    for (std::size_t i = 0; i <= j; ++i) {
      R(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data_[offset(j) + i];
    }
  }
  return R;
}

}  // namespace ocksr
