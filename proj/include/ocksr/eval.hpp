#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ocksr/dataset.hpp"

namespace ocksr {

/// Novelty scores (higher = more novel) with labels (kTarget / kOutlier).
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;
};

/// Probability that a random outlier outscores a random target, ties counted
/// as one half. Throws DataError unless both classes are present.
double roc_auc(const ScoredSet& s);

/// A fitted detector maps a probe to its novelty score.
using Detector = std::function<double(std::span<const double>)>;

struct Method {
  std::string name;
  std::function<Detector(const Matrix& train_targets)> fit;
};

/// OC-KSR with the given bandwidth, or the median pairwise distance of each
/// training split when `sigma` is empty.
Method ocksr_method(std::optional<double> sigma = {}, double delta = 0.0);
Method kmeans_method(std::size_t k, std::uint64_t seed);
Method knndd_method(std::size_t k);
Method kpca_method(std::optional<double> sigma = {}, std::optional<std::size_t> q = {});

struct RepeatResult {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single repeat
  std::vector<double> aucs;
  std::vector<std::uint64_t> seeds;
};

/// For r = 0..repeats-1: split with seed base_seed + r (half of the targets
/// train), fit on the training targets, score the test rows, take the AUC.
RepeatResult repeated_eval(const Dataset& d, const Method& method, std::size_t repeats,
                           std::uint64_t base_seed, double train_fraction = 0.5);

/// Per row (dataset), ranks methods by descending AUC with tied methods
/// sharing the average rank.
Eigen::MatrixXd rank_table(const Eigen::MatrixXd& auc_table);

/// Mean rank of each method over the datasets (rows). Rows containing NaN
/// (failed cells) are left out.
Vector friedman_ranks(const Eigen::MatrixXd& auc_table);

struct FriedmanResult {
  Vector average_ranks;
  std::size_t datasets = 0;  // rows actually ranked
  double chi_square = 0.0;
  double p_value = 1.0;
};

/// Average ranks plus the Friedman chi-square statistic with (methods - 1)
/// degrees of freedom and its upper-tail p-value.
FriedmanResult friedman_test(const Eigen::MatrixXd& auc_table);

/// A benchmark entry: one or more parameter variants of the same detector.
/// The variant with the best mean AUC is reported.
struct MethodFamily {
  std::string name;
  std::vector<Method> variants;
};

/// Builds a method family by name: "ocksr", "kmeans", "knndd" or "kpca".
/// Neighbourhood sizes for kmeans/knndd are swept over [3, 10].
MethodFamily method_family(const std::string& name, std::optional<double> sigma, double delta,
                           std::uint64_t seed);

struct CellResult {
  std::string dataset;
  std::string method;
  std::string variant;  // name of the best variant
  std::optional<RepeatResult> result;
  std::string error;    // set when every variant failed
};

struct EvalReport {
  std::vector<std::string> datasets;
  std::vector<std::string> methods;
  std::vector<CellResult> cells;  // row-major: datasets x methods
  std::size_t repeats = 0;
  std::uint64_t base_seed = 0;
  FriedmanResult friedman;

  const CellResult& cell(std::size_t dataset, std::size_t method) const {
    return cells[dataset * methods.size() + method];
  }
  Eigen::MatrixXd auc_table() const;  // NaN for failed cells
};

EvalReport run_benchmark(const std::vector<Dataset>& datasets, const std::vector<MethodFamily>& methods,
                         std::size_t repeats, std::uint64_t base_seed);

/// Columns dataset,method,variant,auc_mean,auc_std,rank. After the per-dataset
/// rows, one row per method with dataset "average" carries its mean rank.
void write_report_csv(const EvalReport& report, std::ostream& out);
/// Full report including every per-repeat AUC and the Friedman statistics.
void write_report_json(const EvalReport& report, std::ostream& out);

}  // namespace ocksr
