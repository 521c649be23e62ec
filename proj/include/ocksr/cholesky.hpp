#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace ocksr {

/// Upper-triangular Cholesky factor R with R^T R = K, grown one bordered
/// row/column at a time (Sherman's March).
///
/// Storage is packed by column: column j of R (rows 0..j) occupies
/// data_[j(j+1)/2 .. j(j+1)/2 + j]. Appending a column is therefore an
/// amortized O(m) push and never touches existing entries, which keeps
/// `extend` at O(m^2) (dominated by the forward substitution).
class CholeskyFactor {
 public:
  /// Relative pivot tolerance: a pivot <= kPivotEpsilon * |K|_inf is rejected.
  static constexpr double kPivotEpsilon = 1e-12;

  CholeskyFactor() = default;

  /// Batch factorization of a symmetric matrix. Only the upper triangle is read.
  /// Throws NotPositiveDefinite(j) when the j-th pivot is too small.
  static CholeskyFactor factor_batch(const Eigen::MatrixXd& K);

  /// 1x1 factor [sqrt(k11)].
  static CholeskyFactor factor_init(double k11);

  /// Borders the factored matrix with column `k_new` and diagonal `k_diag`:
  /// solves R^T r = k_new, then r_mm = sqrt(k_diag - r^T r).
  /// On failure the factor is left unchanged.
  void extend(std::span<const double> k_new, double k_diag);

  /// Forward substitution: returns theta with R^T theta = b.
  Eigen::VectorXd solve_lower_transposed(const Eigen::VectorXd& b) const;

  /// Back substitution: returns alpha with R alpha = theta.
  Eigen::VectorXd solve_upper(const Eigen::VectorXd& theta) const;

  /// Both substitutions, i.e. solves K alpha = b.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

  std::size_t order() const noexcept { return order_; }

  double at(std::size_t i, std::size_t j) const noexcept {
    return i > j ? 0.0 : data_[offset(j) + i];
  }

  /// Dense copy of R.
  Eigen::MatrixXd upper() const;

 private:
  static std::size_t offset(std::size_t col) noexcept { return col * (col + 1) / 2; }

  std::vector<double> data_;
  std::size_t order_ = 0;
  // Row sums of |K| for the factored matrix, to scale the pivot tolerance the
  // same way the batch path does.
  std::vector<double> abs_row_sums_;
};

}  // namespace ocksr
