#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "ocksr/errors.hpp"
#include "ocksr/eval.hpp"
#include "ocksr/model.hpp"
#include "oracles.hpp"

using namespace ocksr;

namespace {

const KernelSpec kUnit{KernelFamily::Rbf, 1.0, 0.0};

// Two 1-D points whose kernel value is exactly 1/2 under sigma = 1.
Matrix half_kernel_pair() {
  Matrix X(2, 1);
  X << 0.0, std::sqrt(2.0 * std::log(2.0));
  return X;
}

Matrix gaussian(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return test::random_gaussian<Matrix>(n, d, rng);
}

KernelSpec median_spec(const Matrix& X, double delta = 0.0) {
  return {KernelFamily::Rbf, median_pairwise_distance(X), delta};
}

double sample_variance(const Vector& v) {
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("fit on a single sample") {
  Matrix X(1, 2);
  X << 0.3, -1.0;
  const Model m = fit(X, kUnit);
  CHECK(m.alpha.size() == 1);
  CHECK(m.alpha(0) == 1.0);
  CHECK(m.tau == std::nullopt);
  const Score s = score(m, row(X, 0));
  CHECK(s.projection == 1.0);
  CHECK(s.novelty == 0.0);
}

TEST_CASE("fit on two samples with kernel value 1/2") {
  const Matrix X = half_kernel_pair();
  CHECK(kernel_eval(row(X, 0), row(X, 1), kUnit) == doctest::Approx(0.5).epsilon(1e-15));
  const Model m = fit(X, kUnit);
  CHECK(m.alpha(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(m.alpha(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  // (1)(2/3) + (1/2)(2/3) = 1
  const Score s = score(m, row(X, 0));
  CHECK(s.projection == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s.novelty <= 1e-14);
}

TEST_CASE("ridge biases training projections below one") {
  const Model m = fit(half_kernel_pair(), {KernelFamily::Rbf, 1.0, 0.1});
  // [[1.1, .5], [.5, 1.1]] alpha = 1  =>  alpha = 1/1.6; projection = 1.5/1.6
  CHECK(m.alpha(0) == doctest::Approx(0.625).epsilon(1e-14));
  const Vector p = project_train(m);
  CHECK(p(0) == doctest::Approx(0.9375).epsilon(1e-14));
  CHECK(p(1) == doctest::Approx(0.9375).epsilon(1e-14));
  CHECK(m.spec.delta == 0.1);
}

TEST_CASE("score decays to novelty one far from the data") {
  const Model m = fit(half_kernel_pair(), kUnit);
  const std::vector<double> far{1e4};
  const Score s = score(m, far);
  CHECK(s.projection == 0.0);
  CHECK(s.novelty == 1.0);
  CHECK_THROWS_AS(score(m, std::vector<double>{0.0, 1.0}), DataError);
}

TEST_CASE("classify uses an inclusive threshold") {
  Matrix X(1, 1);
  X << 0.0;
  const Model m = fit(X, kUnit);
  CHECK(classify(m, row(X, 0), 0.0) == Decision::Target);
  // kernel value 0.1 => projection 0.1 => novelty 0.9
  const std::vector<double> z{std::sqrt(-2.0 * std::log(0.1))};
  CHECK(score(m, z).novelty == doctest::Approx(0.9).epsilon(1e-14));
  CHECK(classify(m, z, 0.5) == Decision::Outlier);
  const double exact = score(m, z).novelty;
  CHECK(classify(m, z, exact) == Decision::Target);
  CHECK_THROWS_AS(classify(m, z, -0.1), DataError);
}

TEST_CASE("null-space property on random training sets") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix X = gaussian(10 + 5 * static_cast<Eigen::Index>(seed), 8 + seed % 5, seed);
    const Model m = fit(X, median_spec(X));
    CHECK(m.spec.delta == 0.0);
    const Vector p = project_train(m);
    CHECK((p.array() - 1.0).abs().maxCoeff() <= 1e-6);
    CHECK(sample_variance(p) <= 1e-10);
    CHECK(p.mean() * p.mean() == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("fit_supervised response layout") {
  Matrix pos(2, 2), neg(1, 2);
  pos << 0, 0, 0.5, 0.2;
  neg << 3, 3;
  const Model m = fit_supervised(pos, neg, kUnit);
  CHECK(m.n_neg == 1);
  CHECK(m.x_train.row(2) == neg.row(0));
  const Vector p = project_train(m);
  CHECK(p(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(p(2)) <= 1e-12);
  // Negatives project to 0, so their novelty is 1.
  CHECK(score(m, row(neg, 0)).novelty == doctest::Approx(1.0).epsilon(1e-12));

  const Model plain = fit_supervised(pos, Matrix(0, 2), kUnit);
  CHECK(plain.n_neg == 0);
  CHECK(plain.alpha == fit(pos, kUnit).alpha);

  CHECK_THROWS_AS(fit_supervised(pos, Matrix::Zero(1, 3), kUnit), DataError);
}

TEST_CASE("supervised null-space on random sets") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix pos = gaussian(30, 10, seed);
    Matrix neg = gaussian(6, 10, seed + 100);
    neg.array() += 2.0;
    const Model m = fit_supervised(pos, neg, median_spec(pos));
    const Vector p = project_train(m);
    CHECK((p.head(30).array() - 1.0).abs().maxCoeff() <= 1e-6);
    CHECK(p.tail(6).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("delta ladder rescues duplicate rows") {
  Matrix X(3, 2);
  X << 1, 1, 1, 1, 0, 2;
  const Model m = fit(X, kUnit);
  CHECK(m.spec.delta == 1e-8);
  CHECK(m.alpha.allFinite());
}

TEST_CASE("fit rejects bad input") {
  CHECK_THROWS_AS(fit(Matrix(0, 2), kUnit), DataError);
  Matrix bad(1, 1);
  bad << std::nan("");
  CHECK_THROWS_AS(fit(bad, kUnit), DataError);
  CHECK_THROWS_AS(fit(Matrix::Zero(1, 1), {KernelFamily::Rbf, -1.0, 0.0}), DataError);
}

TEST_CASE("fit_incremental matches a batch refit") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::Index n = 20 + 7 * static_cast<Eigen::Index>(seed);
    const Matrix X = gaussian(n, 6, seed);
    const KernelSpec spec = median_spec(X);
    const Eigen::Index split = 1 + static_cast<Eigen::Index>(seed * 3) % (n - 1);
    Model m = fit(X.topRows(split), spec);
    m = fit_incremental(std::move(m), Matrix(X.middleRows(split, (n - split) / 2)));
    m = fit_incremental(std::move(m), Matrix(X.bottomRows(n - split - (n - split) / 2)));
    const Model batch = fit(X, spec);
    CHECK(m.x_train == X);
    CHECK((m.alpha - batch.alpha).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("fit_incremental edge cases") {
  const Matrix X = gaussian(10, 3, 4);
  const Model m = fit(X, median_spec(X));
  const Model same = fit_incremental(m, Matrix(0, 3));
  CHECK(same.alpha == m.alpha);
  CHECK(same.x_train == m.x_train);

  CHECK_THROWS_AS(fit_incremental(m, Matrix(X.topRows(1))), NotPositiveDefinite);
  CHECK_THROWS_AS(fit_incremental(m, Matrix::Zero(1, 2)), DataError);

  Dataset mixed;
  mixed.X = gaussian(2, 3, 9);
  mixed.labels = {kTarget, kOutlier};
  CHECK_THROWS_WITH_AS(fit_incremental(m, mixed), doctest::Contains("target rows only"), DataError);
  mixed.labels = {kTarget, kTarget};
  CHECK(fit_incremental(m, mixed).size() == 12);
}

TEST_CASE("supervised model grows with positives ahead of its negatives") {
  const Matrix pos = gaussian(15, 5, 21);
  Matrix neg = gaussian(4, 5, 22);
  neg.array() += 3.0;
  const Matrix extra = gaussian(6, 5, 23);
  const KernelSpec spec = median_spec(pos);

  Model m = fit_supervised(pos, neg, spec);
  m = fit_incremental(std::move(m), Matrix(extra.topRows(2)));
  m = fit_incremental(std::move(m), Matrix(extra.bottomRows(4)));
  Matrix all_pos(21, 5);
  all_pos << pos, extra;
  const Model batch = fit_supervised(all_pos, neg, spec);

  CHECK(m.n_neg == 4);
  CHECK(m.x_train == batch.x_train);
  CHECK((m.alpha - batch.alpha).cwiseAbs().maxCoeff() <= 1e-9);
  const Vector p = project_train(m);
  CHECK((p.head(21).array() - 1.0).abs().maxCoeff() <= 1e-6);
  CHECK(p.tail(4).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("response scaling rescales alpha and projections") {
  const Matrix X = gaussian(25, 6, 3);
  const Matrix probes = gaussian(10, 6, 4);
  const KernelSpec spec = median_spec(X);
  const Model base = fit(X, spec);
  for (double c : {0.5, 3.0, -2.0}) {
    const Model scaled = detail::fit_with_response(X, Matrix(0, 6), spec, c);
    CHECK(scaled.target_mean == c);
    CHECK((scaled.alpha - c * base.alpha).cwiseAbs().maxCoeff() <= 1e-9 * std::abs(c) * base.alpha.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < probes.rows(); ++i) {
      const Score a = score(base, row(probes, i)), b = score(scaled, row(probes, i));
      CHECK(b.projection == doctest::Approx(c * a.projection).epsilon(1e-9));
      CHECK(b.novelty == doctest::Approx(std::abs(c) * a.novelty).epsilon(1e-9));
    }
  }
}

TEST_CASE("projection gradient matches finite differences") {
  const Matrix X = gaussian(20, 3, 31);
  const KernelSpec spec = median_spec(X);
  const Model m = fit(X, spec);
  const double lipschitz = m.alpha.cwiseAbs().sum() / (spec.sigma * std::sqrt(std::exp(1.0)));
  std::mt19937_64 rng(32);
  std::normal_distribution<double> g;
  for (int t = 0; t < 3; ++t) {
    std::vector<double> z(3);
    for (auto& e : z) e = g(rng);
    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const Eigen::Vector3d diff = Eigen::Map<const Eigen::Vector3d>(z.data()) - X.row(i).transpose();
      grad -= m.alpha(i) * kernel_eval(z, row(X, i), spec) * diff / (spec.sigma * spec.sigma);
    }
    const double h = 1e-6;
    for (int c = 0; c < 3; ++c) {
      auto up = z, down = z;
      up[c] += h;
      down[c] -= h;
      const double fd = (score(m, up).projection - score(m, down).projection) / (2 * h);
      CHECK(fd == doctest::Approx(grad(c)).epsilon(1e-4).scale(1.0));
      CHECK(std::abs(score(m, up).projection - score(m, z).projection) <= lipschitz * h * (1 + 1e-9));
    }
  }
}

TEST_CASE("permuting training rows permutes alpha and keeps scores") {
  const Matrix X = gaussian(30, 4, 41);
  const KernelSpec spec = median_spec(X);
  const Model m = fit(X, spec);
  std::vector<Eigen::Index> perm(30);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(42));
  Matrix Xp(30, 4);
  for (Eigen::Index i = 0; i < 30; ++i) Xp.row(i) = X.row(perm[static_cast<std::size_t>(i)]);
  const Model mp = fit(Xp, spec);
  for (Eigen::Index i = 0; i < 30; ++i) {
    CHECK(mp.alpha(i) == doctest::Approx(m.alpha(perm[static_cast<std::size_t>(i)])).epsilon(1e-8));
  }
  const Matrix probes = gaussian(10, 4, 43);
  for (Eigen::Index i = 0; i < probes.rows(); ++i) {
    CHECK(std::abs(score(m, row(probes, i)).projection - score(mp, row(probes, i)).projection) <= 1e-10);
  }
}

TEST_CASE("empirical_quantile interpolates order statistics") {
  CHECK(empirical_quantile({3, 1, 2}, 1.0) == 3.0);
  CHECK(empirical_quantile({3, 1, 2}, 0.0) == 1.0);
  CHECK(empirical_quantile({3, 1, 2}, 0.5) == 2.0);
  CHECK(empirical_quantile({0, 10}, 0.25) == 2.5);
  CHECK_THROWS_AS(empirical_quantile({}, 0.5), DataError);
}

TEST_CASE("calibrate_threshold") {
  const Matrix X = gaussian(40, 5, 51);
  const KernelSpec spec = median_spec(X);

  // Held-out novelties computed independently of calibrate_threshold.
  std::vector<double> held_out;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    Matrix rest(X.rows() - 1, X.cols());
    rest << X.topRows(i), X.bottomRows(X.rows() - 1 - i);
    held_out.push_back(score(fit(rest, spec), row(X, i)).novelty);
  }
  CHECK(calibrate_threshold(X, spec, 0.0) == *std::max_element(held_out.begin(), held_out.end()));

  const double tau = calibrate_threshold(X, spec, 0.1);
  const auto above = std::count_if(held_out.begin(), held_out.end(), [&](double s) { return s > tau; });
  CHECK(above >= 3);
  CHECK(above <= 5);

  CHECK_THROWS_AS(calibrate_threshold(X.topRows(2), spec, 0.1), DataError);
  CHECK_THROWS_AS(calibrate_threshold(X, spec, 1.0), DataError);
}
