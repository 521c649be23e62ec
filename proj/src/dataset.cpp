#include "ocksr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string_view>

#include "ocksr/errors.hpp"

namespace ocksr {

namespace {

constexpr double kUnitNormTolerance = 1e-12;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

Dataset select_rows(const Dataset& d, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.name = d.name;
  out.X.resize(static_cast<Eigen::Index>(idx.size()), d.X.cols());
  out.labels.reserve(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.X.row(static_cast<Eigen::Index>(r)) = d.X.row(static_cast<Eigen::Index>(idx[r]));
    out.labels.push_back(d.labels[idx[r]]);
  }
  return out;
}

}  // namespace

std::size_t Dataset::count(int label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

Matrix Dataset::rows_with(int label) const {
  Matrix out(static_cast<Eigen::Index>(count(label)), X.cols());
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) out.row(r++) = X.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

void Dataset::validate() const {
  if (labels.size() != size()) {
    throw DataError("label count " + std::to_string(labels.size()) + " does not match row count " +
                    std::to_string(size()));
  }
  for (int l : labels) {
    if (l != kTarget && l != kOutlier) throw DataError("invalid label " + std::to_string(l));
  }
  if (!X.allFinite()) throw DataError("non-finite feature value");
}

Dataset load_csv(const std::filesystem::path& path, int label_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t width = 0;
  std::size_t line_no = 0;
  std::size_t label_idx = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    auto fields = split_fields(view);
    if (width == 0) {
      width = fields.size();
      if (width < 2) throw DataError(path.string() + ": need at least one feature and a label");
      long idx = label_column < 0 ? static_cast<long>(width) + label_column : label_column;
      if (idx < 0 || idx >= static_cast<long>(width)) {
        throw DataError("label column " + std::to_string(label_column) + " out of range");
      }
      label_idx = static_cast<std::size_t>(idx);
      bool header = std::any_of(fields.begin(), fields.end(),
                                [](std::string_view f) { return !parse_double(f); });
      if (header) continue;
    }
    if (fields.size() != width) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(width) + " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> values;
    values.reserve(width - 1);
    for (std::size_t c = 0; c < width; ++c) {
      auto v = parse_double(fields[c]);
      if (c == label_idx) {
        if (!v || (*v != 0.0 && *v != 1.0)) {
          throw DataError(path.string() + ":" + std::to_string(line_no) + ": invalid label '" +
                          std::string(trim(fields[c])) + "'");
        }
        labels.push_back(*v == 1.0 ? kTarget : kOutlier);
        continue;
      }
      if (!v || !std::isfinite(*v)) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-numeric feature '" +
                        std::string(trim(fields[c])) + "'");
      }
      values.push_back(*v);
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError(path.string() + ": no rows");

  Dataset d;
  d.name = path.stem().string();
  d.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c + 1 < width; ++c) {
      d.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  d.labels = std::move(labels);
  return d;
}

void save_csv(const Dataset& d, const std::filesystem::path& path) {
  d.validate();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index c = 0; c < d.X.cols(); ++c) out << 'f' << c << ',';
  out << "label\n";
  for (Eigen::Index r = 0; r < d.X.rows(); ++r) {
    for (Eigen::Index c = 0; c < d.X.cols(); ++c) out << d.X(r, c) << ',';
    out << d.labels[static_cast<std::size_t>(r)] << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

Dataset l2_normalize(const Dataset& d, std::size_t* zero_rows) {
  Dataset out = d;
  std::size_t zeros = 0;
  for (Eigen::Index r = 0; r < out.X.rows(); ++r) {
    double norm = out.X.row(r).norm();
    if (norm == 0.0) {
      ++zeros;
      continue;
    }
    // Rows already of unit length are left bit-for-bit alone, which makes the
    // operation idempotent.
    if (std::abs(norm - 1.0) <= kUnitNormTolerance) continue;
    out.X.row(r) /= norm;
  }
  if (zero_rows) *zero_rows = zeros;
  return out;
}

Split random_split(const Dataset& d, double target_train_fraction, std::uint64_t seed,
                   bool include_outliers) {
  if (!(target_train_fraction > 0.0 && target_train_fraction <= 1.0)) {
    throw DataError("train fraction must lie in (0, 1]");
  }
  std::vector<std::size_t> targets, outliers;
  for (std::size_t i = 0; i < d.labels.size(); ++i) {
    (d.labels[i] == kTarget ? targets : outliers).push_back(i);
  }
  if (targets.size() < 2) throw DataError("need at least 2 target rows to split");

  std::mt19937_64 rng(seed);
  std::shuffle(targets.begin(), targets.end(), rng);
  auto n_train = static_cast<std::size_t>(
      std::llround(target_train_fraction * static_cast<double>(targets.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, targets.size());

  std::vector<std::size_t> train(targets.begin(), targets.begin() + static_cast<long>(n_train));
  std::vector<std::size_t> test(targets.begin() + static_cast<long>(n_train), targets.end());
  if (include_outliers) {
    std::shuffle(outliers.begin(), outliers.end(), rng);
    auto n_out = static_cast<std::size_t>(
        std::llround(target_train_fraction * static_cast<double>(outliers.size())));
    train.insert(train.end(), outliers.begin(), outliers.begin() + static_cast<long>(n_out));
    test.insert(test.end(), outliers.begin() + static_cast<long>(n_out), outliers.end());
  } else {
    test.insert(test.end(), outliers.begin(), outliers.end());
  }
  // Keep file order within each part so that a split is a pure row selection.
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {select_rows(d, train), select_rows(d, test)};
}

Dataset make_synthetic(std::size_t n_pos, std::size_t n_neg, std::size_t d, double separation,
                       std::uint64_t seed) {
  if (d == 0) throw DataError("dimension must be at least 1");
  if (separation < 0.0) throw DataError("separation must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double shift = separation / std::sqrt(static_cast<double>(d));

  Dataset out;
  out.name = "synthetic";
  out.X.resize(static_cast<Eigen::Index>(n_pos + n_neg), static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < out.X.rows(); ++r) {
    const bool outlier = static_cast<std::size_t>(r) >= n_pos;
    for (Eigen::Index c = 0; c < out.X.cols(); ++c) {
      out.X(r, c) = gauss(rng) + (outlier ? shift : 0.0);
    }
    out.labels.push_back(outlier ? kOutlier : kTarget);
  }
  return out;
}

}  // namespace ocksr
