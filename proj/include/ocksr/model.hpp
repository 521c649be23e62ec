#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "ocksr/cholesky.hpp"
#include "ocksr/dataset.hpp"
#include "ocksr/kernel.hpp"

namespace ocksr {

enum class Decision { Target, Outlier };

class Model;

namespace detail {
/// Trains with response value `c` on positives and 0 on negatives. The public
/// trainers use c = 1; any other nonzero c only rescales alpha and every
/// projection. Exposed for tests of that property.
Model fit_with_response(const Matrix& x_pos, const Matrix& x_neg, const KernelSpec& spec, double c);
}  // namespace detail

/// A trained one-class kernel spectral regression model.
///
/// Training rows are kept because the projection of a probe is the
/// representer expansion f(z) = sum_i alpha_i k(z, x_i). Positive rows come
/// first and the last `n_neg` rows (if any) are negatives.
class Model {
 public:
  Matrix x_train;
  Vector alpha;
  KernelSpec spec;            // delta is the value actually used after any fallback
  double target_mean = 1.0;   // common projection of the positive training rows
  std::optional<double> tau;  // decision threshold on the novelty score
  std::size_t n_neg = 0;

  std::size_t size() const { return static_cast<std::size_t>(x_train.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(x_train.cols()); }

 private:
  // Factor of K + delta I in the row order it was built in; `factor_rows[i]`
  // is the x_train row of factor position i. Empty for models read from disk,
  // in which case it is rebuilt on the first incremental update.
  CholeskyFactor factor_;
  std::vector<std::size_t> factor_rows_;

  friend Model detail::fit_with_response(const Matrix&, const Matrix&, const KernelSpec&, double);
  friend Model fit_incremental(Model, const Matrix&);
};

struct Score {
  double projection;  // f(z)
  double novelty;     // |f(z) - target_mean|
};

/// Ridge values tried, in order, after the requested delta fails to give a
/// positive definite Gram matrix.
inline constexpr double kDeltaLadder[] = {1e-8, 1e-6};

/// Unsupervised training: alpha solves (K + delta I) alpha = 1.
Model fit(const Matrix& x_pos, const KernelSpec& spec);

/// Supervised training: rows are ordered positives then negatives and alpha
/// solves (K + delta I) alpha = (1, ..., 1, 0, ..., 0). An empty `x_neg`
/// reduces to `fit`.
Model fit_supervised(const Matrix& x_pos, const Matrix& x_neg, const KernelSpec& spec);

/// Appends positive rows by bordering the existing Cholesky factor one row at
/// a time, then re-solves for alpha. Equivalent to refitting on the
/// concatenated data with the model's delta.
Model fit_incremental(Model model, const Matrix& x_new);

/// Same as above for a labeled batch; throws DataError if any row is an
/// outlier, since negatives change the response layout and need a refit.
Model fit_incremental(Model model, const Dataset& batch);

Score score(const Model& model, std::span<const double> z);

/// Target iff novelty <= tau.
Decision classify(const Model& model, std::span<const double> z, double tau);

/// Projections of every retained training row.
Vector project_train(const Model& model);

/// Leave-one-out threshold: fits on all rows but one, scores the held-out row,
/// and returns the (1 - target_rejection) empirical quantile of the n
/// held-out novelties (linear interpolation between order statistics).
double calibrate_threshold(const Matrix& x_pos, const KernelSpec& spec, double target_rejection);

/// Type-7 quantile (linear interpolation) of `values` at probability p.
double empirical_quantile(std::vector<double> values, double p);

/// Binary model container ("OCKSR1", little-endian IEEE doubles).
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

std::vector<unsigned char> encode_model(const Model& model);
Model decode_model(std::span<const unsigned char> bytes);

}  // namespace ocksr
