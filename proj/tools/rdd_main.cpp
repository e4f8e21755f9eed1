#include "rdd/bandwidth.hpp"
#include "rdd/dataset.hpp"
#include "rdd/errors.hpp"
#include "rdd/heterogeneity.hpp"
#include "rdd/inference.hpp"
#include "rdd/rdplot.hpp"
#include "rdd/replicate.hpp"
#include "rdd/report.hpp"
#include "rdd/simulate.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitLedgerMismatch = 4;

#ifndef RDD_DEFAULT_EXPECTED
#define RDD_DEFAULT_EXPECTED "data/headstart_expected.json"
#endif

struct CommonOptions {
  std::string data;
  std::string score_col;
  std::string outcome_col;
  double cutoff = 0.0;
  std::vector<std::string> covariates;
  std::string group_col;
  double group_threshold = 0.0;
  bool has_threshold = false;
  std::string delimiter = ",";
  bool flip_treated = false;

  std::string kernel = "triangular";
  int p = 1;
  double h = 0.0;
  double b = 0.0;
  std::string vce = "hc3";
  double level = 0.95;
  std::string format = "text";
};

void add_data_options(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--data", opt.data, "delimited input file with a header row")
      ->required();
  cmd->add_option("--score-col", opt.score_col, "running-variable column")
      ->required();
  cmd->add_option("--outcome-col", opt.outcome_col, "outcome column")->required();
  cmd->add_option("--cutoff", opt.cutoff, "cutoff c on the score")->required();
  cmd->add_option("--covariates", opt.covariates,
                  "pre-intervention covariate columns")
      ->delimiter(',');
  cmd->add_option("--group-col", opt.group_col,
                  "column defining groups (used with --group-threshold)");
  cmd->add_option("--group-threshold", opt.group_threshold,
                  "binarize the group column at this threshold (>= is group 1)")
      ->check([&opt](const std::string&) {
        opt.has_threshold = true;
        return std::string();
      });
  cmd->add_option("--delimiter", opt.delimiter, "field delimiter (default ,)");
  cmd->add_flag("--flip-treated", opt.flip_treated,
                "treat scores at/below the cutoff as assigned instead");
}

void add_fit_options(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--kernel", opt.kernel,
                  "triangular | uniform | epanechnikov");
  cmd->add_option("-p,--degree", opt.p, "local polynomial degree (default 1)");
  cmd->add_option("--h", opt.h, "main bandwidth (omit to select the MSE-optimal h)");
  cmd->add_option("--b", opt.b, "bias bandwidth (default: b = h)");
  cmd->add_option("--vce", opt.vce, "hc0 | hc1 | hc2 | hc3 (default hc3)");
  cmd->add_option("--level", opt.level, "confidence level (default 0.95)");
  cmd->add_option("--format", opt.format, "text | json");
}

rdd::Dataset load_dataset(const CommonOptions& opt) {
  rdd::Schema schema;
  schema.score = opt.score_col;
  schema.outcome = opt.outcome_col;
  schema.covariates = opt.covariates;
  if (!opt.group_col.empty() && !opt.has_threshold) schema.group = opt.group_col;
  if (!opt.group_col.empty() && opt.has_threshold &&
      std::find(schema.covariates.begin(), schema.covariates.end(),
                opt.group_col) == schema.covariates.end())
    schema.covariates.push_back(opt.group_col);

  rdd::LoadOptions load;
  if (opt.delimiter.size() != 1)
    throw rdd::ValidationError("--delimiter must be a single character");
  load.delimiter = opt.delimiter[0];
  load.flip_treated = opt.flip_treated;

  rdd::Dataset d = rdd::load_table(opt.data, schema, opt.cutoff, load);
  if (!opt.group_col.empty() && opt.has_threshold)
    d = rdd::discretize_covariate(d, opt.group_col, opt.group_threshold);
  return d;
}

rdd::FitSpec make_spec(const CommonOptions& opt, bool with_covariates) {
  rdd::FitSpec spec;
  spec.p = opt.p;
  spec.kernel = rdd::kernel_from_string(opt.kernel);
  spec.h = opt.h;
  spec.b = opt.b;
  spec.vce = rdd::hc_from_string(opt.vce);
  if (with_covariates) spec.covariates = opt.covariates;
  return spec;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_estimate(const CommonOptions& opt) {
  const rdd::Dataset d = load_dataset(opt);
  print_warnings(d.warnings);

  rdd::FitSpec spec = make_spec(opt, true);
  rdd::InferenceConfig cfg;
  cfg.level = opt.level;

  bool selected = false;
  rdd::BandwidthReport bw;
  if (!(spec.h > 0.0)) {
    bw = rdd::select_bandwidth(d, spec);
    spec.h = bw.h_mse;
    selected = true;
    print_warnings(bw.warnings);
  }

  const rdd::RdEstimate est = rdd::estimate_rd(d, spec, cfg);
  print_warnings(est.warnings);

  const std::string label =
      spec.covariates.empty() ? "canonical" : "covariate-adjusted";
  if (opt.format == "json") {
    nlohmann::json j = rdd::estimate_table_json({{label, est, std::nullopt}});
    if (selected) j["bandwidth_selection"] = rdd::to_json(bw);
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << rdd::render_estimate_table({{label, est, std::nullopt}});
    if (selected)
      std::cout << "h selected by the MSE-optimal plug-in rule"
                << (bw.regularization_active ? " (regularization active)" : "")
                << "\n";
  }
  return kExitOk;
}

int cmd_falsify(const CommonOptions& opt, const std::string& covariate,
                double threshold, bool has_threshold) {
  rdd::Dataset d = load_dataset(opt);
  print_warnings(d.warnings);

  std::string tested = covariate;
  if (has_threshold) {
    d = rdd::discretize_covariate(d, covariate, threshold);
    tested = d.group_name;
  }

  rdd::FitSpec spec = make_spec(opt, true);
  rdd::InferenceConfig cfg;
  cfg.level = opt.level;
  const rdd::RdEstimate est =
      rdd::falsification_estimate(d, tested, spec, cfg);
  print_warnings(est.warnings);

  if (opt.format == "json")
    std::cout << rdd::estimate_table_json({{tested, est, std::nullopt}}).dump(2)
              << "\n";
  else
    std::cout << rdd::render_estimate_table({{tested, est, std::nullopt}});
  return kExitOk;
}

int cmd_hte(const CommonOptions& opt, const std::string& mode,
            const std::vector<std::string>& group_h) {
  if (opt.group_col.empty())
    throw rdd::ValidationError("hte requires --group-col");
  const rdd::Dataset d = load_dataset(opt);
  print_warnings(d.warnings);

  const std::string group =
      opt.has_threshold ? d.group_name : opt.group_col;

  rdd::HteOptions options;
  if (mode == "separate")
    options.mode = rdd::BandwidthMode::separate;
  else if (mode == "common")
    options.mode = rdd::BandwidthMode::common;
  else
    throw rdd::ValidationError("--mode must be separate or common");
  for (const auto& item : group_h) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw rdd::ValidationError("--group-h expects level=h, got '" + item + "'");
    options.fixed_h[std::stod(item.substr(0, eq))] =
        std::stod(item.substr(eq + 1));
  }
  if (options.mode == rdd::BandwidthMode::common && opt.h > 0.0)
    options.common_h = opt.h;

  rdd::FitSpec spec = make_spec(opt, false);
  rdd::InferenceConfig cfg;
  cfg.level = opt.level;

  // Covariates for efficiency exclude the group variable and its source.
  std::vector<std::string> covs = opt.covariates;
  covs.erase(std::remove(covs.begin(), covs.end(), opt.group_col), covs.end());
  const rdd::HteResult res =
      covs.empty() ? rdd::estimate_hte(d, group, spec, cfg, options)
                   : rdd::estimate_hte_with_covariates(d, group, covs, spec,
                                                       cfg, options);
  print_warnings(res.warnings);

  if (opt.format == "json") {
    std::cout << rdd::to_json(res).dump(2) << "\n";
  } else {
    std::vector<rdd::EstimateColumn> cols;
    for (const auto& g : res.per_group)
      cols.push_back({group + " = " + rdd::format_sig(g.level), g.est,
                      std::nullopt});
    std::cout << rdd::render_hte_table(cols, res.equality_p);
  }
  return kExitOk;
}

int cmd_plot(const CommonOptions& opt, int bins_left, int bins_right,
             int overlay_degree, double window, const std::string& out_prefix,
             const std::string& subset_col, double subset_value,
             bool has_subset) {
  const rdd::Dataset d = load_dataset(opt);
  print_warnings(d.warnings);

  rdd::RdPlotOptions options;
  options.bins_left = bins_left;
  options.bins_right = bins_right;
  options.overlay_degree = overlay_degree;
  options.window_h = window;
  options.has_subset = has_subset;
  options.subset_column = subset_col;
  options.subset_value = subset_value;

  const rdd::BinnedSeries series = rdd::build_rdplot(d, options);
  std::cout << "bins used: " << series.left.centers.size() << " (left), "
            << series.right.centers.size() << " (right); plotted rows "
            << series.left.n_plotted << " | " << series.right.n_plotted
            << "\n";

  if (!out_prefix.empty()) {
    std::ofstream json_out(out_prefix + ".json");
    json_out << rdd::to_json(series);
    std::ofstream csv_out(out_prefix + ".csv");
    csv_out << rdd::to_delimited(series);
    std::cout << "wrote " << out_prefix << ".json and " << out_prefix
              << ".csv\n";
  } else {
    std::cout << (opt.format == "json" ? rdd::to_json(series)
                                       : rdd::to_delimited(series))
              << "\n";
  }
  return kExitOk;
}

int cmd_replicate(const std::string& data_dir, const std::string& expected,
                  const std::string& out_dir) {
  rdd::ReplicationInput input;
  input.data_path = data_dir;
  input.expected_path = expected;
  input.out_dir = out_dir;
  const rdd::ReplicationOutcome outcome = rdd::run_replication(input);
  std::cout << outcome.ledger_text;
  if (!outcome.all_pass) {
    std::cerr << "replication ledger mismatch\n";
    return kExitLedgerMismatch;
  }
  return kExitOk;
}

int cmd_simulate(std::uint64_t seed, int n, int reps_coverage,
                 int reps_efficiency, int reps_eq_size, int reps_eq_power,
                 const std::string& study, const std::string& format,
                 int threads) {
  rdd::SimulateConfig config;
  config.seed = seed;
  config.n = n;
  config.reps_coverage = reps_coverage;
  config.reps_efficiency = reps_efficiency;
  config.reps_equality_size = reps_eq_size;
  config.reps_equality_power = reps_eq_power;
  config.threads = threads;
  if (study != "all") {
    config.run_coverage = study == "coverage";
    config.run_efficiency = study == "efficiency";
    config.run_equality = study == "equality";
    if (!config.run_coverage && !config.run_efficiency && !config.run_equality)
      throw rdd::ValidationError(
          "--study must be all, coverage, efficiency or equality");
  }
  const rdd::SimulateReport report = rdd::run_simulations(config);
  if (format == "json")
    std::cout << report.to_json().dump(2) << "\n";
  else
    std::cout << report.to_text();
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Sharp regression-discontinuity estimation with covariate adjustment,\n"
      "heterogeneity analysis, MSE-optimal bandwidths, robust bias-corrected\n"
      "inference and RD-plot construction."};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value configuration file");
  // --h is the bandwidth option, so help lives on --help only.
  app.set_help_flag("--help", "print help and exit");

  CommonOptions opt;

  auto* estimate = app.add_subcommand(
      "estimate", "RD treatment effect at the cutoff (Table-1-shaped output)");
  estimate->set_help_flag("--help", "print help and exit");
  add_data_options(estimate, opt);
  add_fit_options(estimate, opt);

  auto* falsify = app.add_subcommand(
      "falsify", "conventional RD estimate using a covariate as the outcome");
  falsify->set_help_flag("--help", "print help and exit");
  std::string fals_covariate;
  double fals_threshold = 0.0;
  bool fals_has_threshold = false;
  add_data_options(falsify, opt);
  add_fit_options(falsify, opt);
  falsify->add_option("--covariate", fals_covariate,
                      "pre-intervention column to test")
      ->required();
  falsify
      ->add_option("--threshold", fals_threshold,
                   "test the indicator 1{covariate >= threshold} instead")
      ->check([&fals_has_threshold](const std::string&) {
        fals_has_threshold = true;
        return std::string();
      });

  auto* hte = app.add_subcommand(
      "hte", "conditional RD effects by group (Table-2-shaped output)");
  hte->set_help_flag("--help", "print help and exit");
  std::string hte_mode = "separate";
  std::vector<std::string> hte_group_h;
  add_data_options(hte, opt);
  add_fit_options(hte, opt);
  hte->add_option("--mode", hte_mode,
                  "separate (per-group bandwidths) or common");
  hte->add_option("--group-h", hte_group_h,
                  "fixed per-group bandwidth, level=h (repeatable)");

  auto* plot = app.add_subcommand("plot", "RD-plot data (bins + overlays)");
  plot->set_help_flag("--help", "print help and exit");
  int bins_left = 0, bins_right = 0, overlay_degree = 1;
  double window = 0.0, subset_value = 0.0;
  bool has_subset = false;
  std::string out_prefix, subset_col;
  add_data_options(plot, opt);
  plot->add_option("--bins-left", bins_left, "bins left of the cutoff (0 = auto)");
  plot->add_option("--bins-right", bins_right, "bins right of the cutoff (0 = auto)");
  plot->add_option("--overlay-degree", overlay_degree,
                   "degree of the global overlay fit (default 1)");
  plot->add_option("--window", window,
                   "half-width h for a local plot over [c-h, c+h]");
  plot->add_option("--out", out_prefix, "output file prefix");
  plot->add_option("--subset-col", subset_col, "plot only rows of one group");
  plot->add_option("--subset-value", subset_value, "group value to keep")
      ->check([&has_subset](const std::string&) {
        has_subset = true;
        return std::string();
      });
  plot->add_option("--format", opt.format, "text | json");

  auto* replicate = app.add_subcommand(
      "replicate", "reproduce the study tables and figures from raw data");
  replicate->set_help_flag("--help", "print help and exit");
  std::string repl_data, repl_out = "replication_out";
  std::string repl_expected = RDD_DEFAULT_EXPECTED;
  replicate
      ->add_option("--data-dir", repl_data,
                   "study data file, or directory containing it")
      ->required();
  replicate->add_option("--expected", repl_expected,
                        "expected-value ledger (JSON)");
  replicate->add_option("--out", repl_out, "output directory");

  auto* simulate = app.add_subcommand(
      "simulate", "seeded Monte Carlo checks of the inference pipeline");
  simulate->set_help_flag("--help", "print help and exit");
  std::uint64_t seed = 1;
  int sim_n = 2000, reps_cov = 2000, reps_eff = 500, reps_size = 1000,
      reps_power = 500, threads = 0;
  std::string study = "all", sim_format = "text";
  simulate->add_option("--seed", seed, "RNG seed")->required();
  simulate->add_option("--n", sim_n, "sample size per replication");
  simulate->add_option("--reps-coverage", reps_cov, "coverage replications");
  simulate->add_option("--reps-efficiency", reps_eff, "efficiency replications");
  simulate->add_option("--reps-equality-size", reps_size,
                       "equality-test size replications");
  simulate->add_option("--reps-equality-power", reps_power,
                       "equality-test power replications");
  simulate->add_option("--study", study,
                       "all | coverage | efficiency | equality");
  simulate->add_option("--format", sim_format, "text | json");
  simulate->add_option("--threads", threads, "worker threads (0 = auto)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (estimate->parsed()) return cmd_estimate(opt);
    if (falsify->parsed())
      return cmd_falsify(opt, fals_covariate, fals_threshold,
                         fals_has_threshold);
    if (hte->parsed()) return cmd_hte(opt, hte_mode, hte_group_h);
    if (plot->parsed())
      return cmd_plot(opt, bins_left, bins_right, overlay_degree, window,
                      out_prefix, subset_col, subset_value, has_subset);
    if (replicate->parsed())
      return cmd_replicate(repl_data, repl_expected, repl_out);
    if (simulate->parsed())
      return cmd_simulate(seed, sim_n, reps_cov, reps_eff, reps_size,
                          reps_power, study, sim_format, threads);
  } catch (const rdd::ValidationError& e) {
    std::cerr << "error: validation: " << e.what() << "\n";
    return kExitValidation;
  } catch (const rdd::NumericalError& e) {
    std::cerr << "error: numerical: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
