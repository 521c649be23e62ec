#include "ocksr/model.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <string>

#include "ocksr/errors.hpp"

namespace ocksr {

namespace {

void check_rows(const Matrix& X, const char* what) {
  if (!X.allFinite()) throw DataError(std::string(what) + " contains non-finite values");
}

Matrix stack(const Matrix& top, const Matrix& bottom) {
  if (bottom.rows() == 0) return top;
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

}  // namespace

namespace detail {

Model fit_with_response(const Matrix& x_pos, const Matrix& x_neg, const KernelSpec& spec, double c) {
  spec.validate();
  if (x_pos.rows() < 1) throw DataError("training needs at least one positive row");
  if (x_neg.rows() > 0 && x_neg.cols() != x_pos.cols()) {
    throw DataError("negative rows have dimension " + std::to_string(x_neg.cols()) +
                    ", positives have " + std::to_string(x_pos.cols()));
  }
  check_rows(x_pos, "positive training data");
  check_rows(x_neg, "negative training data");

  Model model;
  model.x_train = stack(x_pos, x_neg);
  model.n_neg = static_cast<std::size_t>(x_neg.rows());
  model.target_mean = c;

  KernelSpec unregularized = spec;
  unregularized.delta = 0.0;
  const Eigen::MatrixXd K0 = gram(model.x_train, unregularized).K;

  std::vector<double> deltas{spec.delta};
  for (double d : kDeltaLadder) {
    if (d > spec.delta) deltas.push_back(d);
  }
  for (std::size_t attempt = 0; attempt < deltas.size(); ++attempt) {
    Eigen::MatrixXd K = K0;
    K.diagonal().array() += deltas[attempt];
    try {
      model.factor_ = CholeskyFactor::factor_batch(K);
    } catch (const NotPositiveDefinite& e) {
      if (attempt + 1 == deltas.size()) throw;
      std::clog << "ocksr: " << e.what() << " with delta=" << deltas[attempt]
                << ", retrying with delta=" << deltas[attempt + 1] << '\n';
      continue;
    }
    model.spec = spec;
    model.spec.delta = deltas[attempt];
    break;
  }

  const Eigen::Index n = model.x_train.rows();
  Vector nu = Vector::Zero(n);
  nu.head(x_pos.rows()).setConstant(c);
  model.alpha = model.factor_.solve(nu);
  model.factor_rows_.resize(static_cast<std::size_t>(n));
  std::iota(model.factor_rows_.begin(), model.factor_rows_.end(), std::size_t{0});
  return model;
}

}  // namespace detail

Model fit(const Matrix& x_pos, const KernelSpec& spec) {
  return detail::fit_with_response(x_pos, Matrix(0, x_pos.cols()), spec, 1.0);
}

Model fit_supervised(const Matrix& x_pos, const Matrix& x_neg, const KernelSpec& spec) {
  if (x_neg.rows() == 0) return fit(x_pos, spec);
  return detail::fit_with_response(x_pos, x_neg, spec, 1.0);
}

Model fit_incremental(Model model, const Matrix& x_new) {
  if (x_new.rows() == 0) return model;
  if (x_new.cols() != model.x_train.cols()) {
    throw DataError("new rows have dimension " + std::to_string(x_new.cols()) +
                    ", model expects " + std::to_string(model.x_train.cols()));
  }
  check_rows(x_new, "new training data");
  model.spec.validate();

  const std::size_t n_old = model.size();
  const std::size_t n_pos_old = n_old - model.n_neg;
  const auto added = static_cast<std::size_t>(x_new.rows());

  if (model.factor_.order() != n_old) {
    model.factor_ = CholeskyFactor::factor_batch(gram(model.x_train, model.spec).K);
    model.factor_rows_.resize(n_old);
    std::iota(model.factor_rows_.begin(), model.factor_rows_.end(), std::size_t{0});
  }

  // New positives go in front of the negatives; the factor keeps its own
  // (append-only) order and `factor_rows_` tracks where each row now lives.
  Matrix grown(static_cast<Eigen::Index>(n_old + added), model.x_train.cols());
  const auto n_pos = static_cast<Eigen::Index>(n_pos_old);
  grown.topRows(n_pos) = model.x_train.topRows(n_pos);
  grown.middleRows(n_pos, x_new.rows()) = x_new;
  grown.bottomRows(static_cast<Eigen::Index>(model.n_neg)) =
      model.x_train.bottomRows(static_cast<Eigen::Index>(model.n_neg));
  for (auto& r : model.factor_rows_) {
    if (r >= n_pos_old) r += added;
  }

  CholeskyFactor& factor = model.factor_;
  std::vector<std::size_t>& factor_rows = model.factor_rows_;
  std::vector<double> k_new;
  for (std::size_t t = 0; t < added; ++t) {
    const std::size_t dest = n_pos_old + t;
    const auto z = row(grown, static_cast<Eigen::Index>(dest));
    k_new.resize(factor.order());
    for (std::size_t i = 0; i < k_new.size(); ++i) {
      k_new[i] = kernel_eval(row(grown, static_cast<Eigen::Index>(factor_rows[i])), z, model.spec);
    }
    factor.extend(k_new, 1.0 + model.spec.delta);
    factor_rows.push_back(dest);
  }

  const std::size_t n_pos_new = n_pos_old + added;
  Vector nu(static_cast<Eigen::Index>(factor.order()));
  for (std::size_t i = 0; i < factor.order(); ++i) {
    nu(static_cast<Eigen::Index>(i)) = factor_rows[i] < n_pos_new ? model.target_mean : 0.0;
  }
  const Vector solved = factor.solve(nu);
  Vector alpha(solved.size());
  for (std::size_t i = 0; i < factor_rows.size(); ++i) {
    alpha(static_cast<Eigen::Index>(factor_rows[i])) = solved(static_cast<Eigen::Index>(i));
  }

  model.x_train = std::move(grown);
  model.alpha = std::move(alpha);
  return model;
}

Model fit_incremental(Model model, const Dataset& batch) {
  batch.validate();
  if (batch.count(kOutlier) > 0) {
    throw DataError("incremental updates accept target rows only; refit to add negatives");
  }
  return fit_incremental(std::move(model), batch.X);
}

Score score(const Model& model, std::span<const double> z) {
  const double f = kernel_vector(model.x_train, z, model.spec).dot(model.alpha);
  return {f, std::abs(f - model.target_mean)};
}

Decision classify(const Model& model, std::span<const double> z, double tau) {
  if (!(tau >= 0.0)) throw DataError("threshold must be non-negative");
  return score(model, z).novelty <= tau ? Decision::Target : Decision::Outlier;
}

Vector project_train(const Model& model) {
  Vector out(model.x_train.rows());
  for (Eigen::Index i = 0; i < model.x_train.rows(); ++i) {
    out(i) = score(model, row(model.x_train, i)).projection;
  }
  return out;
}

double empirical_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

double calibrate_threshold(const Matrix& x_pos, const KernelSpec& spec, double target_rejection) {
  if (x_pos.rows() < 3) throw DataError("leave-one-out calibration needs at least 3 rows");
  if (!(target_rejection >= 0.0 && target_rejection < 1.0)) {
    throw DataError("target rejection rate must lie in [0, 1)");
  }
  const Eigen::Index n = x_pos.rows();
  std::vector<double> held_out;
  held_out.reserve(static_cast<std::size_t>(n));
  Matrix rest(n - 1, x_pos.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    rest.topRows(i) = x_pos.topRows(i);
    rest.bottomRows(n - 1 - i) = x_pos.bottomRows(n - 1 - i);
    const Model m = fit(rest, spec);
    held_out.push_back(score(m, row(x_pos, i)).novelty);
  }
  return empirical_quantile(std::move(held_out), 1.0 - target_rejection);
}

}  // namespace ocksr
