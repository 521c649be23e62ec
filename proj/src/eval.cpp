#include "ocksr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>

#include <boost/math/special_functions/gamma.hpp>
#include "json.hpp"

#include "ocksr/baselines.hpp"
#include "ocksr/errors.hpp"
#include "ocksr/model.hpp"

namespace ocksr {

namespace {

constexpr std::size_t kNeighbourMin = 3;
constexpr std::size_t kNeighbourMax = 10;

double bandwidth_for(const Matrix& train, std::optional<double> sigma) {
  return sigma ? *sigma : median_pairwise_distance(train);
}

}  // namespace

double roc_auc(const ScoredSet& s) {
  if (s.scores.size() != s.labels.size()) throw DataError("scores and labels differ in length");
  std::vector<std::size_t> order(s.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (double v : s.scores) {
    if (std::isnan(v)) throw DataError("NaN novelty score");
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  // Walk groups of equal score; an outlier beats every target in a lower group
  // and ties with the targets in its own group. Counted in integers so the
  // result is exact.
  std::uint64_t targets_below = 0, wins = 0, ties = 0, n_target = 0, n_outlier = 0;
  for (std::size_t g = 0; g < order.size();) {
    std::size_t end = g;
    std::uint64_t t = 0, o = 0;
    while (end < order.size() && s.scores[order[end]] == s.scores[order[g]]) {
      const int label = s.labels[order[end]];
      if (label == kTarget) {
        ++t;
      } else if (label == kOutlier) {
        ++o;
      } else {
        throw DataError("invalid label " + std::to_string(label));
      }
      ++end;
    }
    wins += o * targets_below;
    ties += o * t;
    targets_below += t;
    n_target += t;
    n_outlier += o;
    g = end;
  }
  if (n_target == 0 || n_outlier == 0) throw DataError("AUC needs both targets and outliers");
  return static_cast<double>(2 * wins + ties) / static_cast<double>(2 * n_target * n_outlier);
}

Method ocksr_method(std::optional<double> sigma, double delta) {
  return {"ocksr", [=](const Matrix& train) -> Detector {
            KernelSpec spec{KernelFamily::Rbf, bandwidth_for(train, sigma), delta};
            return [model = fit(train, spec)](std::span<const double> z) { return score(model, z).novelty; };
          }};
}

Method kmeans_method(std::size_t k, std::uint64_t seed) {
  return {"kmeans(k=" + std::to_string(k) + ")", [=](const Matrix& train) -> Detector {
            return [model = kmeans_fit(train, k, seed)](std::span<const double> z) {
              return kmeans_score(model, z);
            };
          }};
}

Method knndd_method(std::size_t k) {
  return {"knndd(k=" + std::to_string(k) + ")", [=](const Matrix& train) -> Detector {
            return [train, k](std::span<const double> z) { return knndd_score(train, z, k); };
          }};
}

Method kpca_method(std::optional<double> sigma, std::optional<std::size_t> q) {
  std::string name = q ? "kpca(q=" + std::to_string(*q) + ")" : "kpca";
  return {name, [=](const Matrix& train) -> Detector {
            KernelSpec spec{KernelFamily::Rbf, bandwidth_for(train, sigma), 0.0};
            return [model = kpca_fit(train, spec, q)](std::span<const double> z) { return kpca_score(model, z); };
          }};
}

RepeatResult repeated_eval(const Dataset& d, const Method& method, std::size_t repeats,
                           std::uint64_t base_seed, double train_fraction) {
  if (repeats < 1) throw DataError("repeats must be at least 1");
  RepeatResult out;
  for (std::size_t r = 0; r < repeats; ++r) {
    const std::uint64_t seed = base_seed + r;
    const std::string where = method.name + ", repeat " + std::to_string(r) + ": ";
    try {
      const Split split = random_split(d, train_fraction, seed);
      const Detector detector = method.fit(split.train.X);
      ScoredSet scored;
      scored.labels = split.test.labels;
      scored.scores.reserve(split.test.size());
      for (Eigen::Index i = 0; i < split.test.X.rows(); ++i) scored.scores.push_back(detector(row(split.test.X, i)));
      out.aucs.push_back(roc_auc(scored));
      out.seeds.push_back(seed);
    } catch (const NotPositiveDefinite& e) {
      throw NumericalError(where + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError(where + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  }
  const double n = static_cast<double>(out.aucs.size());
  out.mean = std::accumulate(out.aucs.begin(), out.aucs.end(), 0.0) / n;
  if (out.aucs.size() > 1) {
    double ss = 0.0;
    for (double a : out.aucs) ss += (a - out.mean) * (a - out.mean);
    out.std = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

Eigen::MatrixXd rank_table(const Eigen::MatrixXd& auc_table) {
  Eigen::MatrixXd ranks(auc_table.rows(), auc_table.cols());
  const auto m = static_cast<std::size_t>(auc_table.cols());
  std::vector<Eigen::Index> order(m);
  for (Eigen::Index r = 0; r < auc_table.rows(); ++r) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return auc_table(r, a) > auc_table(r, b); });
    for (std::size_t g = 0; g < m;) {
      std::size_t end = g + 1;
      while (end < m && auc_table(r, order[end]) == auc_table(r, order[g])) ++end;
      // positions g..end-1 hold ranks g+1..end
      const double shared = 0.5 * static_cast<double>(g + 1 + end);
      for (std::size_t i = g; i < end; ++i) ranks(r, order[i]) = shared;
      g = end;
    }
  }
  return ranks;
}

FriedmanResult friedman_test(const Eigen::MatrixXd& auc_table) {
  const Eigen::Index k = auc_table.cols();
  if (k < 1) throw DataError("ranking needs at least one method");
  std::vector<Eigen::Index> complete;
  for (Eigen::Index r = 0; r < auc_table.rows(); ++r) {
    if (!auc_table.row(r).array().isNaN().any()) complete.push_back(r);
  }
  if (complete.empty()) throw DataError("ranking needs at least one dataset with every method scored");

  Eigen::MatrixXd kept(static_cast<Eigen::Index>(complete.size()), k);
  for (std::size_t i = 0; i < complete.size(); ++i) kept.row(static_cast<Eigen::Index>(i)) = auc_table.row(complete[i]);

  FriedmanResult out;
  out.datasets = complete.size();
  out.average_ranks = rank_table(kept).colwise().mean().transpose();
  if (k >= 2) {
    const double N = static_cast<double>(out.datasets);
    const double kk = static_cast<double>(k);
    const double sum_sq = out.average_ranks.squaredNorm();
    out.chi_square = 12.0 * N / (kk * (kk + 1.0)) * (sum_sq - kk * (kk + 1.0) * (kk + 1.0) / 4.0);
    out.chi_square = std::max(out.chi_square, 0.0);
    out.p_value = boost::math::gamma_q(0.5 * (kk - 1.0), 0.5 * out.chi_square);
  }
  return out;
}

Vector friedman_ranks(const Eigen::MatrixXd& auc_table) { return friedman_test(auc_table).average_ranks; }

MethodFamily method_family(const std::string& name, std::optional<double> sigma, double delta,
                           std::uint64_t seed) {
  MethodFamily family{name, {}};
  if (name == "ocksr") {
    family.variants.push_back(ocksr_method(sigma, delta));
  } else if (name == "kmeans") {
    for (std::size_t k = kNeighbourMin; k <= kNeighbourMax; ++k) family.variants.push_back(kmeans_method(k, seed));
  } else if (name == "knndd") {
    for (std::size_t k = kNeighbourMin; k <= kNeighbourMax; ++k) family.variants.push_back(knndd_method(k));
  } else if (name == "kpca") {
    family.variants.push_back(kpca_method(sigma));
  } else {
    throw DataError("unknown method '" + name + "' (expected ocksr, kmeans, knndd or kpca)");
  }
  return family;
}

Eigen::MatrixXd EvalReport::auc_table() const {
  Eigen::MatrixXd t(static_cast<Eigen::Index>(datasets.size()), static_cast<Eigen::Index>(methods.size()));
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const auto& c = cell(d, m);
      t(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m)) =
          c.result ? c.result->mean : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return t;
}

EvalReport run_benchmark(const std::vector<Dataset>& datasets, const std::vector<MethodFamily>& methods,
                         std::size_t repeats, std::uint64_t base_seed) {
  if (datasets.empty() || methods.empty()) throw DataError("benchmark needs at least one dataset and one method");
  EvalReport report;
  report.repeats = repeats;
  report.base_seed = base_seed;
  for (const auto& d : datasets) report.datasets.push_back(d.name);
  for (const auto& m : methods) report.methods.push_back(m.name);

  for (const auto& d : datasets) {
    for (const auto& family : methods) {
      CellResult cell{d.name, family.name, {}, {}, {}};
      for (const auto& variant : family.variants) {
        try {
          RepeatResult r = repeated_eval(d, variant, repeats, base_seed);
          if (!cell.result || r.mean > cell.result->mean) {
            cell.result = std::move(r);
            cell.variant = variant.name;
          }
        } catch (const std::runtime_error& e) {
          if (cell.error.empty()) cell.error = e.what();
        }
      }
      if (cell.result) cell.error.clear();
      report.cells.push_back(std::move(cell));
    }
  }
  report.friedman = friedman_test(report.auc_table());
  return report;
}

void write_report_csv(const EvalReport& report, std::ostream& out) {
  const auto table = report.auc_table();
  const Eigen::MatrixXd ranks = rank_table(table);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "dataset,method,variant,auc_mean,auc_std,rank\n";
  for (std::size_t d = 0; d < report.datasets.size(); ++d) {
    const bool complete = !table.row(static_cast<Eigen::Index>(d)).array().isNaN().any();
    for (std::size_t m = 0; m < report.methods.size(); ++m) {
      const auto& c = report.cell(d, m);
      out << c.dataset << ',' << c.method << ',' << c.variant << ',';
      if (c.result) out << c.result->mean << ',' << c.result->std;
      else out << ',';
      out << ',';
      if (complete) out << ranks(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m));
      out << '\n';
    }
  }
  for (std::size_t m = 0; m < report.methods.size(); ++m) {
    out << "average," << report.methods[m] << ",,,," << report.friedman.average_ranks(static_cast<Eigen::Index>(m))
        << '\n';
  }
}

void write_report_json(const EvalReport& report, std::ostream& out) {
  nlohmann::json j;
  j["repeats"] = report.repeats;
  j["base_seed"] = report.base_seed;
  j["datasets"] = report.datasets;
  j["methods"] = report.methods;
  auto& cells = j["cells"] = nlohmann::json::array();
  for (const auto& c : report.cells) {
    nlohmann::json cj{{"dataset", c.dataset}, {"method", c.method}};
    if (c.result) {
      cj["variant"] = c.variant;
      cj["auc_mean"] = c.result->mean;
      cj["auc_std"] = c.result->std;
      cj["aucs"] = c.result->aucs;
      cj["seeds"] = c.result->seeds;
    } else {
      cj["error"] = c.error;
    }
    cells.push_back(std::move(cj));
  }
  const auto& f = report.friedman;
  j["friedman"] = {{"datasets_ranked", f.datasets},
                   {"average_ranks", std::vector<double>(f.average_ranks.begin(), f.average_ranks.end())},
                   {"chi_square", f.chi_square},
                   {"p_value", f.p_value}};
  out << j.dump(2) << '\n';
}

}  // namespace ocksr
