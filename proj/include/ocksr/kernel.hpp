#pragma once

#include <span>

#include <Eigen/Core>

#include "ocksr/dataset.hpp"

namespace ocksr {

enum class KernelFamily { Rbf };

/// Gaussian RBF kernel exp(-|x - y|^2 / (2 sigma^2)) plus a ridge `delta`
/// that is added to the Gram diagonal only.
struct KernelSpec {
  KernelFamily family = KernelFamily::Rbf;
  double sigma = 1.0;
  double delta = 0.0;

  void validate() const;
};

struct GramMatrix {
  Eigen::MatrixXd K;
  KernelSpec spec;
};

double kernel_eval(std::span<const double> x, std::span<const double> y, const KernelSpec& spec);

/// K(i, j) = kernel_eval(x_i, x_j) + delta * [i == j]. The upper triangle is
/// computed once and mirrored, so K is exactly symmetric.
GramMatrix gram(const Matrix& X, const KernelSpec& spec);

/// Entry i is kernel_eval(x_i, z); no ridge term.
Vector kernel_vector(const Matrix& X, std::span<const double> z, const KernelSpec& spec);

/// Median of the n(n-1)/2 pairwise Euclidean distances between rows of X.
/// Used as the default RBF bandwidth. Requires at least two rows.
double median_pairwise_distance(const Matrix& X);

}  // namespace ocksr
