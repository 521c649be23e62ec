#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ocksr/baselines.hpp"
#include "ocksr/dataset.hpp"
#include "ocksr/errors.hpp"
#include "ocksr/eval.hpp"
#include "ocksr/kernel.hpp"
#include "ocksr/model.hpp"

namespace ocksr::cli {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::vector<std::string> data;
  int label_col = -1;
  std::string sigma = "median";
  double delta = 0.0;
  std::vector<std::string> methods;
  std::size_t repeats = 100;
  std::uint64_t seed = 0;
  std::string out;
  std::string model;
  std::optional<double> tau;
  double rejection = 0.05;
  std::string append;
  bool negatives = false;
  bool normalize = false;
  bool no_normalize = false;
  bool unlabeled = false;
  // synth
  std::size_t n_pos = 100;
  std::size_t n_neg = 100;
  std::size_t dim = 10;
  double separation = 6.0;
};

std::optional<double> parse_sigma(const std::string& text) {
  if (text == "median") return std::nullopt;
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw UsageError("--sigma must be 'median' or a positive number, got '" + text + "'");
  }
  if (!(v > 0.0) || !std::isfinite(v)) throw UsageError("--sigma must be positive");
  return v;
}

Dataset load(const RunConfig& cfg, const std::string& path, bool normalize) {
  Dataset d = load_csv(path, cfg.label_col);
  if (normalize) d = l2_normalize(d);
  return d;
}

KernelSpec spec_for(const RunConfig& cfg, const Matrix& train) {
  KernelSpec spec;
  const auto sigma = parse_sigma(cfg.sigma);
  spec.sigma = sigma ? *sigma : median_pairwise_distance(train);
  spec.delta = cfg.delta;
  return spec;
}

double variance(const Vector& v) {
  if (v.size() < 2) return 0.0;
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

void print_model_summary(const Model& model, std::ostream& out) {
  const Vector proj = project_train(model);
  const auto n_pos = static_cast<Eigen::Index>(model.size() - model.n_neg);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "n=" << model.size() << '\n'
      << "n_neg=" << model.n_neg << '\n'
      << "d=" << model.dim() << '\n'
      << "sigma=" << model.spec.sigma << '\n'
      << "delta=" << model.spec.delta << '\n'
      << "projection_variance=" << variance(proj.head(n_pos)) << '\n';
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  if (cfg.data.size() != 1) throw UsageError("train needs exactly one --data file");
  const Dataset d = load(cfg, cfg.data.front(), cfg.normalize);
  Model model;
  std::string dest = cfg.out;
  if (!cfg.append.empty()) {
    if (dest.empty()) dest = cfg.append;
    model = fit_incremental(load_model(cfg.append), d);
  } else {
    if (dest.empty()) throw UsageError("train needs --out");
    const Matrix pos = d.rows_with(kTarget);
    if (pos.rows() == 0) throw DataError("no target rows in " + cfg.data.front());
    const KernelSpec spec = spec_for(cfg, pos);
    model = cfg.negatives ? fit_supervised(pos, d.rows_with(kOutlier), spec) : fit(pos, spec);
  }
  save_model(model, dest);
  print_model_summary(model, out);
  return kOk;
}

Matrix probe_rows(const RunConfig& cfg) {
  if (cfg.data.size() != 1) throw UsageError("score needs exactly one --data file");
  if (!cfg.unlabeled) return load(cfg, cfg.data.front(), cfg.normalize).X;
  // Probe files without a label column: read with a dummy label appended.
  std::ifstream in(cfg.data.front());
  if (!in) throw DataError("cannot open " + cfg.data.front());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> values;
    std::stringstream ss(line);
    std::string field;
    bool numeric = true;
    while (std::getline(ss, field, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
        if (field.find_first_not_of(" \t\r", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (rows.empty() && width == 0) {
        width = std::numeric_limits<std::size_t>::max();  // header seen
        continue;
      }
      throw DataError(cfg.data.front() + ": non-numeric probe value");
    }
    if (!rows.empty() && values.size() != rows.front().size()) throw DataError(cfg.data.front() + ": ragged rows");
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError(cfg.data.front() + ": no rows");
  Dataset d;
  d.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      d.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  d.labels.assign(rows.size(), kTarget);
  d.validate();
  return cfg.normalize ? l2_normalize(d).X : d.X;
}

int cmd_score(const RunConfig& cfg, std::ostream& out) {
  if (cfg.model.empty()) throw UsageError("score needs --model");
  const Model model = load_model(cfg.model);
  const Matrix probes = probe_rows(cfg);
  if (static_cast<std::size_t>(probes.cols()) != model.dim()) {
    throw DataError("probe dimension " + std::to_string(probes.cols()) + " does not match model dimension " +
                    std::to_string(model.dim()));
  }
  const std::optional<double> tau = cfg.tau ? cfg.tau : model.tau;

  std::ofstream file;
  if (!cfg.out.empty()) {
    file.open(cfg.out);
    if (!file) throw DataError("cannot write " + cfg.out);
  }
  std::ostream& sink = cfg.out.empty() ? out : file;
  sink << std::setprecision(std::numeric_limits<double>::max_digits10);
  sink << "index,projection,novelty" << (tau ? ",decision" : "") << '\n';
  for (Eigen::Index i = 0; i < probes.rows(); ++i) {
    const Score s = score(model, row(probes, i));
    sink << i << ',' << s.projection << ',' << s.novelty;
    if (tau) sink << ',' << (classify(model, row(probes, i), *tau) == Decision::Target ? "target" : "outlier");
    sink << '\n';
  }
  return kOk;
}

int cmd_calibrate(const RunConfig& cfg, std::ostream& out) {
  if (cfg.data.size() != 1) throw UsageError("calibrate needs exactly one --data file");
  const Dataset d = load(cfg, cfg.data.front(), cfg.normalize);
  const Matrix pos = d.rows_with(kTarget);
  if (pos.rows() < 3) throw DataError("leave-one-out calibration needs at least 3 target rows");
  const KernelSpec spec = spec_for(cfg, pos);
  const double tau = calibrate_threshold(pos, spec, cfg.rejection);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "sigma=" << spec.sigma << '\n' << "tau=" << tau << '\n';
  if (!cfg.out.empty()) {
    Model model = fit(pos, spec);
    model.tau = tau;
    save_model(model, cfg.out);
  }
  return kOk;
}

std::vector<Dataset> load_all(const RunConfig& cfg) {
  std::vector<Dataset> out;
  for (const auto& path : cfg.data) out.push_back(load(cfg, path, !cfg.no_normalize));
  return out;
}

std::vector<MethodFamily> families(const RunConfig& cfg, std::vector<std::string> names) {
  const auto sigma = parse_sigma(cfg.sigma);
  std::vector<MethodFamily> out;
  for (const auto& n : names) out.push_back(method_family(n, sigma, cfg.delta, cfg.seed));
  return out;
}

void write_reports(const EvalReport& report, const std::string& prefix) {
  std::ofstream csv(prefix + ".csv");
  std::ofstream json(prefix + ".json");
  if (!csv || !json) throw DataError("cannot write report files with prefix " + prefix);
  write_report_csv(report, csv);
  write_report_json(report, json);
}

int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.data.size() != 1) throw UsageError("eval needs exactly one --data file");
  const auto names = cfg.methods.empty() ? std::vector<std::string>{"ocksr"} : cfg.methods;
  const EvalReport report = run_benchmark(load_all(cfg), families(cfg, names), cfg.repeats, cfg.seed);
  out << std::fixed << std::setprecision(4);
  for (const auto& c : report.cells) {
    if (c.result) {
      out << c.method << " (" << c.variant << "): AUC " << c.result->mean << " +/- " << c.result->std << '\n';
    } else {
      err << "warning: " << c.method << " failed: " << c.error << '\n';
    }
  }
  if (!cfg.out.empty()) write_reports(report, cfg.out);
  for (const auto& c : report.cells) {
    if (c.result) return kOk;
  }
  return kNumericalError;
}

int cmd_bench(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.data.empty()) throw UsageError("bench needs at least one --data file");
  const auto names = cfg.methods.empty() ? std::vector<std::string>{"ocksr", "kmeans", "knndd", "kpca"} : cfg.methods;
  const EvalReport report = run_benchmark(load_all(cfg), families(cfg, names), cfg.repeats, cfg.seed);
  for (const auto& c : report.cells) {
    if (!c.result) err << "warning: " << c.dataset << "/" << c.method << " missing, excluded from ranking: " << c.error << '\n';
  }
  write_report_csv(report, out);
  out << "friedman_chi_square=" << report.friedman.chi_square << '\n'
      << "friedman_p_value=" << report.friedman.p_value << '\n';
  if (!cfg.out.empty()) write_reports(report, cfg.out);
  return kOk;
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  if (cfg.out.empty()) throw UsageError("synth needs --out");
  const Dataset d = make_synthetic(cfg.n_pos, cfg.n_neg, cfg.dim, cfg.separation, cfg.seed);
  save_csv(d, cfg.out);
  out << "wrote " << d.size() << " rows (" << cfg.n_pos << " targets, " << cfg.n_neg << " outliers) to "
      << cfg.out << '\n';
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"One-class kernel spectral regression novelty detection"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_data = [&](CLI::App* sub, bool many) {
    if (many) {
      sub->add_option("--data", cfg.data, "Labeled CSV file(s)")->required();
    } else {
      sub->add_option("--data", cfg.data, "CSV file")->required()->expected(1);
    }
    sub->add_option("--label-col", cfg.label_col, "Label column index; negative counts from the end")
        ->capture_default_str();
  };
  auto add_kernel = [&](CLI::App* sub) {
    sub->add_option("--sigma", cfg.sigma, "RBF bandwidth or 'median'")->capture_default_str();
    sub->add_option("--delta", cfg.delta, "Ridge added to the Gram diagonal")->check(CLI::NonNegativeNumber);
  };

  auto* train = app.add_subcommand("train", "Fit a model and write it to --out");
  add_data(train, false);
  add_kernel(train);
  train->add_option("--out", cfg.out, "Model file to write");
  train->add_flag("--negatives", cfg.negatives, "Use outlier rows as negative training examples");
  train->add_option("--append", cfg.append, "Existing model to extend incrementally with the target rows");
  train->add_flag("--normalize", cfg.normalize, "Scale every row to unit L2 norm first");

  auto* score_cmd = app.add_subcommand("score", "Score probe rows with a trained model");
  score_cmd->add_option("--model", cfg.model, "Model file")->required();
  score_cmd->add_option("--data", cfg.data, "Probe CSV")->required()->expected(1);
  auto* label_opt = score_cmd->add_option("--label-col", cfg.label_col, "Label column to drop from the probes");
  score_cmd->add_option("--tau", cfg.tau, "Decision threshold (overrides the model's)")->check(CLI::NonNegativeNumber);
  score_cmd->add_option("--out", cfg.out, "Output CSV (default: stdout)");
  score_cmd->add_flag("--normalize", cfg.normalize, "Scale every row to unit L2 norm first");

  auto* calibrate = app.add_subcommand("calibrate", "Leave-one-out threshold for a target rejection rate");
  add_data(calibrate, false);
  add_kernel(calibrate);
  calibrate->add_option("--rejection", cfg.rejection, "Fraction of targets to reject")
      ->check(CLI::Range(0.0, 0.999999))
      ->capture_default_str();
  calibrate->add_option("--out", cfg.out, "Write a model carrying the threshold");
  calibrate->add_flag("--normalize", cfg.normalize, "Scale every row to unit L2 norm first");

  auto add_protocol = [&](CLI::App* sub) {
    add_kernel(sub);
    sub->add_option("--method", cfg.methods, "ocksr, kmeans, knndd, kpca")->delimiter(',');
    sub->add_option("--repeats", cfg.repeats, "Random splits per method")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--seed", cfg.seed, "Base seed; repeat r uses seed + r")->capture_default_str();
    sub->add_option("--out", cfg.out, "Report prefix; writes <prefix>.csv and <prefix>.json");
    sub->add_flag("--no-normalize", cfg.no_normalize, "Skip per-row unit L2 normalization");
  };
  auto* eval = app.add_subcommand("eval", "Repeated random-split AUC on one dataset");
  add_data(eval, false);
  add_protocol(eval);
  auto* bench = app.add_subcommand("bench", "AUC table and Friedman ranks over datasets and methods");
  add_data(bench, true);
  add_protocol(bench);

  auto* synth = app.add_subcommand("synth", "Write a synthetic Gaussian dataset");
  synth->add_option("--n-pos", cfg.n_pos, "Target rows")->capture_default_str();
  synth->add_option("--n-neg", cfg.n_neg, "Outlier rows")->capture_default_str();
  synth->add_option("--dim", cfg.dim, "Feature dimension")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--separation", cfg.separation, "Distance between class means")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  synth->add_option("--seed", cfg.seed)->capture_default_str();
  synth->add_option("--out", cfg.out, "CSV file to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  cfg.unlabeled = label_opt->count() == 0;

  try {
    if (*train) return cmd_train(cfg, out);
    if (*score_cmd) return cmd_score(cfg, out);
    if (*calibrate) return cmd_calibrate(cfg, out);
    if (*eval) return cmd_eval(cfg, out, err);
    if (*bench) return cmd_bench(cfg, out, err);
    if (*synth) return cmd_synth(cfg, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace ocksr::cli
