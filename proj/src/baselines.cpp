#include "ocksr/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ocksr/errors.hpp"

namespace ocksr {

namespace {

constexpr std::size_t kMaxLloydIterations = 100;
constexpr double kCenterTolerance = 1e-8;
constexpr double kKpcaEnergy = 0.95;

double distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

void check_dim(const Matrix& X, std::span<const double> z) {
  if (static_cast<Eigen::Index>(z.size()) != X.cols()) {
    throw DataError("probe has dimension " + std::to_string(z.size()) + ", expected " +
                    std::to_string(X.cols()));
  }
}

// Index and distance of the k-th nearest row of X to z (1-based k), skipping `skip`.
std::pair<Eigen::Index, double> kth_nearest(const Matrix& X, std::span<const double> z,
                                            std::size_t k, Eigen::Index skip) {
  std::vector<std::pair<double, Eigen::Index>> d;
  d.reserve(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    if (i != skip) d.emplace_back(distance(row(X, i), z), i);
  }
  std::nth_element(d.begin(), d.begin() + static_cast<long>(k - 1), d.end());
  return {d[k - 1].second, d[k - 1].first};
}

}  // namespace

KMeansModel kmeans_fit(const Matrix& x_pos, std::size_t k, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(x_pos.rows());
  if (k < 1 || k > n) {
    throw DataError("k-means needs 1 <= k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  }
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    auto ra = row(x_pos, a), rb = row(x_pos, b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  Matrix X(x_pos.rows(), x_pos.cols());
  for (std::size_t i = 0; i < n; ++i) X.row(static_cast<Eigen::Index>(i)) = x_pos.row(order[i]);

  std::vector<Eigen::Index> pick(n);
  std::iota(pick.begin(), pick.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(pick.begin(), pick.end(), rng);

  KMeansModel model;
  model.centers.resize(static_cast<Eigen::Index>(k), X.cols());
  for (std::size_t c = 0; c < k; ++c) model.centers.row(static_cast<Eigen::Index>(c)) = X.row(pick[c]);

  std::vector<std::size_t> assign(n);
  for (std::size_t it = 0; it < kMaxLloydIterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = distance(row(X, static_cast<Eigen::Index>(i)),
                                  row(model.centers, static_cast<Eigen::Index>(c)));
        if (d < best) {
          best = d;
          assign[i] = c;
        }
      }
    }
    Matrix next = Matrix::Zero(model.centers.rows(), model.centers.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      next.row(static_cast<Eigen::Index>(assign[i])) += X.row(static_cast<Eigen::Index>(i));
      ++counts[assign[i]];
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      if (counts[c] == 0) {
        next.row(ci) = model.centers.row(ci);  // empty cluster keeps its center
      } else {
        next.row(ci) /= static_cast<double>(counts[c]);
      }
      moved = std::max(moved, (next.row(ci) - model.centers.row(ci)).norm());
    }
    model.centers = std::move(next);
    model.iterations = it + 1;
    if (moved < kCenterTolerance) break;
  }
  return model;
}

double kmeans_score(const KMeansModel& model, std::span<const double> z) {
  check_dim(model.centers, z);
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < model.centers.rows(); ++c) {
    best = std::min(best, distance(row(model.centers, c), z));
  }
  return best;
}

double knndd_score(const Matrix& x_pos, std::span<const double> z, std::size_t k) {
  check_dim(x_pos, z);
  const auto n = static_cast<std::size_t>(x_pos.rows());
  if (k < 1 || k + 1 > n) {
    throw DataError("KNNDD needs 1 <= k <= n - 1 (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  }
  const auto [nearest, to_z] = kth_nearest(x_pos, z, k, -1);
  const double local = kth_nearest(x_pos, row(x_pos, nearest), k, nearest).second;
  if (local == 0.0) return to_z == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return to_z / local;
}

KpcaModel kpca_fit(const Matrix& x_pos, const KernelSpec& spec, std::optional<std::size_t> q) {
  const Eigen::Index n = x_pos.rows();
  if (n < 2) throw DataError("kernel PCA needs at least two rows");
  if (q && (*q < 1 || *q + 1 > static_cast<std::size_t>(n))) {
    throw DataError("kernel PCA needs 1 <= q <= n - 1");
  }
  KpcaModel model;
  model.x_train = x_pos;
  model.spec = spec;
  model.spec.delta = 0.0;

  const Eigen::MatrixXd K = gram(x_pos, model.spec).K;
  model.gram_row_means = K.rowwise().mean();
  model.gram_mean = model.gram_row_means.mean();
  Eigen::MatrixXd centered = K;
  centered.colwise() -= model.gram_row_means;
  centered.rowwise() -= model.gram_row_means.transpose();
  centered.array() += model.gram_mean;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(centered);
  if (solver.info() != Eigen::Success) throw NumericalError("kernel PCA eigen-solver did not converge");
  const Vector values = solver.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();

  const double top = std::max(values(0), 0.0);
  Eigen::Index positive = 0;
  while (positive < n - 1 && values(positive) > 1e-12 * top && top > 0.0) ++positive;
  if (positive == 0) throw NumericalError("centered Gram matrix has no positive eigenvalue");

  Eigen::Index keep = 0;
  if (q) {
    keep = static_cast<Eigen::Index>(*q);
  } else {
    const double total = values.head(positive).sum();
    double acc = 0.0;
    while (keep < positive && acc < kKpcaEnergy * total) acc += values(keep++);
  }
  keep = std::clamp<Eigen::Index>(keep, 1, positive);

  model.eigenvalues = values.head(keep);
  model.coefficients = vectors.leftCols(keep);
  for (Eigen::Index l = 0; l < keep; ++l) model.coefficients.col(l) /= std::sqrt(values(l));
  return model;
}

double kpca_score(const KpcaModel& model, std::span<const double> z) {
  const Vector kz = kernel_vector(model.x_train, z, model.spec);
  const double kz_mean = kz.mean();
  const Vector centered = kz.array() - kz_mean - model.gram_row_means.array() + model.gram_mean;
  const double self = kernel_eval(z, z, model.spec) - 2.0 * kz_mean + model.gram_mean;
  const double explained = (model.coefficients.transpose() * centered).squaredNorm();
  return std::max(self - explained, 0.0);
}

}  // namespace ocksr
