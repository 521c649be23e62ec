#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ocksr {

/// Observations are stored one per row so that a row is a contiguous d-vector.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline std::span<const double> row(const Matrix& X, Eigen::Index i) {
  return {X.data() + i * X.cols(), static_cast<std::size_t>(X.cols())};
}

inline constexpr int kTarget = 1;
inline constexpr int kOutlier = 0;

struct Dataset {
  Matrix X;
  std::vector<int> labels;  // kTarget or kOutlier, one per row of X
  std::string name;

  std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(X.cols()); }
  std::size_t count(int label) const;

  /// Rows carrying `label`, in their original order.
  Matrix rows_with(int label) const;

  /// Throws DataError unless labels match X and every entry is finite.
  void validate() const;
};

/// Reads a comma-separated file. `label_column` may be negative to count from
/// the end (-1 is the last column). A first row that does not parse as numbers
/// is treated as a header.
Dataset load_csv(const std::filesystem::path& path, int label_column);

/// Writes features followed by the label as the last column, with a header,
/// using enough digits to round-trip every value.
void save_csv(const Dataset& d, const std::filesystem::path& path);

/// Scales every nonzero row to unit Euclidean norm. Zero rows are kept as they
/// are and counted in `zero_rows` when it is non-null.
Dataset l2_normalize(const Dataset& d, std::size_t* zero_rows = nullptr);

struct Split {
  Dataset train;
  Dataset test;
};

/// Sends `target_train_fraction` of the target rows to `train`; the remaining
/// targets and every outlier go to `test`. With `include_outliers` the same
/// fraction of outliers is moved to `train` as well (supervised protocol).
Split random_split(const Dataset& d, double target_train_fraction, std::uint64_t seed,
                   bool include_outliers = false);

/// Targets ~ N(0, I_d); outliers ~ N(m, I_d) with |m| = separation along the
/// all-ones direction. Targets come first.
Dataset make_synthetic(std::size_t n_pos, std::size_t n_neg, std::size_t d, double separation,
                       std::uint64_t seed);

}  // namespace ocksr
