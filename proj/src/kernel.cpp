#include "ocksr/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ocksr/errors.hpp"

namespace ocksr {

namespace {

double squared_distance(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

void KernelSpec::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw DataError("kernel bandwidth must be positive, got " + std::to_string(sigma));
  }
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw DataError("ridge delta must be non-negative, got " + std::to_string(delta));
  }
}

double kernel_eval(std::span<const double> x, std::span<const double> y, const KernelSpec& spec) {
  if (x.size() != y.size()) {
    throw DataError("dimension mismatch: " + std::to_string(x.size()) + " vs " +
                    std::to_string(y.size()));
  }
  return std::exp(-squared_distance(x, y) / (2.0 * spec.sigma * spec.sigma));
}

GramMatrix gram(const Matrix& X, const KernelSpec& spec) {
  spec.validate();
  const Eigen::Index n = X.rows();
  if (n < 1) throw DataError("Gram matrix needs at least one row");
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) {
      K(i, j) = kernel_eval(row(X, i), row(X, j), spec);
      K(j, i) = K(i, j);
    }
    K(j, j) = 1.0 + spec.delta;
  }
  return {std::move(K), spec};
}

Vector kernel_vector(const Matrix& X, std::span<const double> z, const KernelSpec& spec) {
  if (static_cast<Eigen::Index>(z.size()) != X.cols()) {
    throw DataError("probe has dimension " + std::to_string(z.size()) + ", model expects " +
                    std::to_string(X.cols()));
  }
  Vector k(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) k(i) = kernel_eval(row(X, i), z, spec);
  return k;
}

double median_pairwise_distance(const Matrix& X) {
  const Eigen::Index n = X.rows();
  if (n < 2) throw DataError("median pairwise distance needs at least two rows");
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      dist.push_back(std::sqrt(squared_distance(row(X, i), row(X, j))));
    }
  }
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<long>(mid), dist.end());
  double median = dist[mid];
  if (dist.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(dist.begin(), dist.begin() + static_cast<long>(mid)));
  }
  return median;
}

}  // namespace ocksr
