#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include "ocksr/dataset.hpp"
#include "ocksr/kernel.hpp"

namespace ocksr {

// Reference novelty detectors. Every score is >= 0 and larger means more novel.

struct KMeansModel {
  Matrix centers;
  std::size_t iterations = 0;
};

/// Lloyd's algorithm started from k distinct rows chosen with `seed`, after
/// sorting the rows lexicographically so the result does not depend on input
/// order. Stops when no center moves by 1e-8 or after 100 iterations.
KMeansModel kmeans_fit(const Matrix& x_pos, std::size_t k, std::uint64_t seed);

/// Distance to the nearest center.
double kmeans_score(const KMeansModel& model, std::span<const double> z);

/// Nearest-neighbour data description: distance from z to its k-th nearest
/// training row, divided by that row's distance to its own k-th nearest
/// training row. Requires 1 <= k <= n - 1.
double knndd_score(const Matrix& x_pos, std::span<const double> z, std::size_t k);

struct KpcaModel {
  Matrix x_train;
  KernelSpec spec;                // only sigma is used; no ridge
  Vector eigenvalues;             // top q of the centered Gram, non-increasing
  Eigen::MatrixXd coefficients;   // n x q; column l = v_l / sqrt(lambda_l)
  Vector gram_row_means;          // (1/n) sum_j K_ij
  double gram_mean = 0.0;         // (1/n^2) sum_ij K_ij

  std::size_t components() const { return static_cast<std::size_t>(eigenvalues.size()); }
};

/// Kernel PCA on the centered Gram matrix. Without `q` the smallest number of
/// components holding 95% of the eigenvalue mass is kept. q is capped at the
/// number of numerically positive eigenvalues.
KpcaModel kpca_fit(const Matrix& x_pos, const KernelSpec& spec, std::optional<std::size_t> q = {});

/// Squared feature-space distance between the centered image of z and its
/// projection onto the principal subspace.
double kpca_score(const KpcaModel& model, std::span<const double> z);

}  // namespace ocksr
