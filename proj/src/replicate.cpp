#include "rdd/replicate.hpp"

#include "rdd/bandwidth.hpp"
#include "rdd/errors.hpp"
#include "rdd/heterogeneity.hpp"
#include "rdd/inference.hpp"
#include "rdd/rdplot.hpp"
#include "rdd/report.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace rdd {

namespace {

namespace fs = std::filesystem;

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot open expected-value ledger '" + path + "'");
  nlohmann::json j;
  in >> j;
  return j;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out)
    throw ValidationError("cannot write output file '" + path.string() + "'");
  out << content;
}

// Actual values keyed by check id; flags are stored as 0/1.
using ValueMap = std::map<std::string, double>;

void record_estimate(ValueMap& values, const std::string& prefix,
                     const RdEstimate& est) {
  values[prefix + ".tau"] = est.tau;
  values[prefix + ".ci_lo"] = est.ci_lo;
  values[prefix + ".ci_hi"] = est.ci_hi;
  values[prefix + ".p"] = est.p_value;
  values[prefix + ".n_left"] = static_cast<double>(est.n_left);
  values[prefix + ".n_right"] = static_cast<double>(est.n_right);
  values[prefix + ".pct"] = est.pct_effect;
}

bool evaluate(const std::string& mode, double expected, double actual,
              double tol) {
  if (!std::isfinite(actual)) return false;
  if (mode == "abs") return std::abs(actual - expected) <= tol;
  if (mode == "rel")
    return std::abs(actual - expected) <= tol * std::abs(expected);
  if (mode == "exact") return actual == expected;
  if (mode == "flag_false") return actual == 0.0;
  throw ValidationError("unknown check mode '" + mode + "' in ledger");
}

} // namespace

ReplicationOutcome run_replication(const ReplicationInput& input) {
  const nlohmann::json expected = load_json(input.expected_path);
  const auto& ds = expected.at("dataset");

  fs::path data_path(input.data_path);
  if (fs::is_directory(data_path))
    data_path /= ds.at("file").get<std::string>();
  if (!fs::exists(data_path))
    throw ValidationError("replication data not found at '" +
                          data_path.string() + "'");

  Schema schema;
  schema.score = ds.at("score").get<std::string>();
  schema.outcome = ds.at("outcome").get<std::string>();
  const std::string population = ds.at("population").get<std::string>();
  const std::vector<std::string> efficiency_covs =
      ds.at("efficiency_covariates").get<std::vector<std::string>>();
  schema.covariates = efficiency_covs;
  schema.covariates.push_back(population);
  const double cutoff = ds.at("cutoff").get<double>();
  const double pop_threshold = ds.at("population_threshold").get<double>();

  const Dataset base = load_table(data_path.string(), schema, cutoff);
  const Dataset grouped = discretize_covariate(base, population, pop_threshold);

  std::vector<std::string> all_covs = efficiency_covs;
  all_covs.push_back(population);

  const auto& bw_cfg = expected.at("bandwidths");
  const double h1_canonical = bw_cfg.at("table1").at("canonical").get<double>();
  const double h1_efficiency = bw_cfg.at("table1").at("efficiency").get<double>();
  const double h1_all = bw_cfg.at("table1").at("all").get<double>();

  ValueMap values;
  FitSpec canonical;
  canonical.p = 1;
  canonical.kernel = KernelKind::triangular;
  canonical.vce = HcFlavor::hc3;

  ReplicationOutcome outcome;

  // ---- Table 1, fixed bandwidths ----------------------------------------
  const auto t0 = std::chrono::steady_clock::now();

  FitSpec spec1 = canonical;
  spec1.h = h1_canonical;
  const RdEstimate t1_can = estimate_rd(base, spec1);

  FitSpec spec2 = canonical;
  spec2.h = h1_efficiency;
  spec2.covariates = efficiency_covs;
  const RdEstimate t1_eff = estimate_rd(base, spec2);

  FitSpec spec3 = canonical;
  spec3.h = h1_all;
  spec3.covariates = all_covs;
  const RdEstimate t1_all = estimate_rd(base, spec3);

  outcome.table1_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  record_estimate(values, "t1.canonical", t1_can);
  record_estimate(values, "t1.efficiency", t1_eff);
  record_estimate(values, "t1.all", t1_all);
  values["t1.efficiency.ci_change"] = ci_length_change_pct(t1_can, t1_eff);
  values["t1.all.ci_change"] = ci_length_change_pct(t1_can, t1_all);

  // ---- Bandwidth selector, auto mode ------------------------------------
  {
    const BandwidthReport bw1 = select_bandwidth(base, canonical);
    values["bw.canonical.h"] = bw1.h_mse;
    values["bw.canonical.regularization"] = bw1.regularization_active ? 1.0 : 0.0;

    FitSpec s = canonical;
    s.covariates = efficiency_covs;
    const BandwidthReport bw2 = select_bandwidth(base, s);
    values["bw.efficiency.h"] = bw2.h_mse;
    values["bw.efficiency.regularization"] = bw2.regularization_active ? 1.0 : 0.0;

    s.covariates = all_covs;
    const BandwidthReport bw3 = select_bandwidth(base, s);
    values["bw.all.h"] = bw3.h_mse;
    values["bw.all.regularization"] = bw3.regularization_active ? 1.0 : 0.0;
  }

  // ---- Table 2 ------------------------------------------------------------
  const std::string group_col = grouped.group_name;
  const double level_small = 0.0;
  const double level_large = 1.0;

  auto record_hte = [&](const std::string& prefix, const HteResult& res) {
    const GroupEstimate* small = res.find(level_small);
    const GroupEstimate* large = res.find(level_large);
    if (!small || !large)
      throw ValidationError("replication: expected two population groups");
    record_estimate(values, prefix + ".small", small->est);
    record_estimate(values, prefix + ".large", large->est);
    values[prefix + ".heterog_p"] = res.equality_p;
  };

  // Panel B: one common bandwidth, reused from the full-sample selection.
  HteOptions common;
  common.mode = BandwidthMode::common;
  common.common_h = bw_cfg.at("table2_panel_b").at("canonical").get<double>();
  const HteResult t2b_can =
      estimate_hte(grouped, group_col, canonical, {}, common);
  record_hte("t2b.canonical", t2b_can);

  common.common_h = bw_cfg.at("table2_panel_b").at("efficiency").get<double>();
  const HteResult t2b_eff = estimate_hte_with_covariates(
      grouped, group_col, efficiency_covs, canonical, {}, common);
  record_hte("t2b.efficiency", t2b_eff);

  auto group_ci_change = [&](const HteResult& can, const HteResult& eff,
                             double level) {
    return ci_length_change_pct(can.find(level)->est, eff.find(level)->est);
  };
  values["t2b.efficiency.small.ci_change"] =
      group_ci_change(t2b_can, t2b_eff, level_small);
  values["t2b.efficiency.large.ci_change"] =
      group_ci_change(t2b_can, t2b_eff, level_large);

  // Panel A: separate bandwidths, fixed to the reported values.
  HteOptions separate;
  separate.mode = BandwidthMode::separate;
  separate.fixed_h = {
      {level_small,
       bw_cfg.at("table2_panel_a_canonical").at("small").get<double>()},
      {level_large,
       bw_cfg.at("table2_panel_a_canonical").at("large").get<double>()}};
  const HteResult t2a_can =
      estimate_hte(grouped, group_col, canonical, {}, separate);
  record_hte("t2a.canonical", t2a_can);

  separate.fixed_h = {
      {level_small,
       bw_cfg.at("table2_panel_a_efficiency").at("small").get<double>()},
      {level_large,
       bw_cfg.at("table2_panel_a_efficiency").at("large").get<double>()}};
  const HteResult t2a_eff = estimate_hte_with_covariates(
      grouped, group_col, efficiency_covs, canonical, {}, separate);
  record_hte("t2a.efficiency", t2a_eff);

  values["t2a.efficiency.small.ci_change"] =
      group_ci_change(t2a_can, t2a_eff, level_small);
  values["t2a.efficiency.large.ci_change"] =
      group_ci_change(t2a_can, t2a_eff, level_large);

  // Panel A with data-driven bandwidths: the h cells at the +-10% tolerance.
  {
    HteOptions auto_sep;
    auto_sep.mode = BandwidthMode::separate;
    const HteResult auto_can =
        estimate_hte(grouped, group_col, canonical, {}, auto_sep);
    values["t2a.auto.canonical.small.h"] =
        auto_can.find(level_small)->est.h_used;
    values["t2a.auto.canonical.large.h"] =
        auto_can.find(level_large)->est.h_used;

    const HteResult auto_eff = estimate_hte_with_covariates(
        grouped, group_col, efficiency_covs, canonical, {}, auto_sep);
    values["t2a.auto.efficiency.small.h"] =
        auto_eff.find(level_small)->est.h_used;
    values["t2a.auto.efficiency.large.h"] =
        auto_eff.find(level_large)->est.h_used;
  }

  // ---- Falsification: large-county indicator as the outcome --------------
  const RdEstimate fals =
      falsification_estimate(grouped, group_col, canonical, {});
  values["fals.large_indicator.tau"] = fals.tau;
  values["fals.large_indicator.p"] = fals.p_value;

  // ---- Score the ledger ---------------------------------------------------
  for (const auto& check : expected.at("checks")) {
    CheckResult result;
    result.id = check.at("id").get<std::string>();
    result.group = check.at("group").get<std::string>();
    result.expected = check.at("expected").get<double>();
    result.tol = check.at("tol").get<double>();
    result.mode = check.at("mode").get<std::string>();
    result.source = check.value("source", "");
    const auto it = values.find(result.id);
    result.actual =
        it != values.end() ? it->second : std::numeric_limits<double>::quiet_NaN();
    result.pass = evaluate(result.mode, result.expected, result.actual, result.tol);
    outcome.checks.push_back(std::move(result));
  }
  outcome.all_pass = true;
  for (const auto& c : outcome.checks) outcome.all_pass &= c.pass;

  // ---- Ledger rendering ----------------------------------------------------
  {
    std::ostringstream text;
    std::size_t passed = 0;
    for (const auto& c : outcome.checks) {
      text << (c.pass ? "PASS" : "FAIL") << "  " << c.id << "  expected "
           << format_sig(c.expected) << " (" << c.mode;
      if (c.mode == "abs") text << " +-" << format_sig(c.tol);
      if (c.mode == "rel") text << " +-" << format_sig(100.0 * c.tol) << "%";
      text << ")  actual " << format_sig(c.actual) << "\n";
      passed += c.pass ? 1 : 0;
    }
    text << passed << "/" << outcome.checks.size() << " checks passed\n";
    outcome.ledger_text = text.str();

    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : outcome.checks) {
      checks.push_back({{"id", c.id},
                        {"group", c.group},
                        {"expected", c.expected},
                        {"actual", c.actual},
                        {"tol", c.tol},
                        {"mode", c.mode},
                        {"source", c.source},
                        {"pass", c.pass}});
    }
    outcome.ledger_json = {{"schema_version", 1},
                           {"all_pass", outcome.all_pass},
                           {"table1_seconds", outcome.table1_seconds},
                           {"checks", std::move(checks)}};
  }

  // ---- Output files ---------------------------------------------------------
  if (input.write_outputs) {
    const fs::path out_dir(input.out_dir.empty() ? "." : input.out_dir);
    fs::create_directories(out_dir);

    const std::vector<EstimateColumn> table1 = {
        {"canonical", t1_can, std::nullopt},
        {"with covariates for efficiency", t1_eff,
         values["t1.efficiency.ci_change"]},
        {"with all covariates", t1_all, values["t1.all.ci_change"]}};
    write_file(out_dir / "table1.txt", render_estimate_table(table1));
    write_file(out_dir / "table1.json", estimate_table_json(table1).dump(2));

    auto hte_columns = [&](const HteResult& can, const HteResult& eff) {
      std::vector<EstimateColumn> cols;
      cols.push_back({"canonical, small", can.find(level_small)->est, std::nullopt});
      cols.push_back({"canonical, large", can.find(level_large)->est, std::nullopt});
      cols.push_back({"covariates, small", eff.find(level_small)->est,
                      group_ci_change(can, eff, level_small)});
      cols.push_back({"covariates, large", eff.find(level_large)->est,
                      group_ci_change(can, eff, level_large)});
      return cols;
    };
    write_file(out_dir / "table2_panel_a.txt",
               render_hte_table(hte_columns(t2a_can, t2a_eff),
                                t2a_can.equality_p) +
                   "p-value (heterogeneity, covariates): " +
                   format_sig(t2a_eff.equality_p) + "\n");
    write_file(out_dir / "table2_panel_b.txt",
               render_hte_table(hte_columns(t2b_can, t2b_eff),
                                t2b_can.equality_p) +
                   "p-value (heterogeneity, covariates): " +
                   format_sig(t2b_eff.equality_p) + "\n");
    write_file(out_dir / "table2_panel_a.json",
               nlohmann::json{{"canonical", to_json(t2a_can)},
                              {"covariates", to_json(t2a_eff)}}
                   .dump(2));
    write_file(out_dir / "table2_panel_b.json",
               nlohmann::json{{"canonical", to_json(t2b_can)},
                              {"covariates", to_json(t2b_eff)}}
                   .dump(2));

    write_file(out_dir / "falsification.txt",
               render_estimate_table({{"large-county indicator", fals,
                                       std::nullopt}}));
    write_file(out_dir / "falsification.json", to_json(fals).dump(2));

    // Figures: global/local RD plots, overall and per group.
    RdPlotOptions global_plot;
    global_plot.overlay_degree = 1;
    const BinnedSeries fig1a = build_rdplot(base, global_plot);
    write_file(out_dir / "fig1_global.json", to_json(fig1a));
    write_file(out_dir / "fig1_global.csv", to_delimited(fig1a));

    RdPlotOptions local_plot = global_plot;
    local_plot.window_h = h1_canonical;
    const BinnedSeries fig1b = build_rdplot(base, local_plot);
    write_file(out_dir / "fig1_local.json", to_json(fig1b));
    write_file(out_dir / "fig1_local.csv", to_delimited(fig1b));

    for (const auto& [label, level] :
         std::vector<std::pair<std::string, double>>{{"small", level_small},
                                                     {"large", level_large}}) {
      RdPlotOptions per_group = global_plot;
      per_group.has_subset = true;
      per_group.subset_column = group_col;
      per_group.subset_value = level;
      const BinnedSeries fig2a = build_rdplot(grouped, per_group);
      write_file(out_dir / ("fig2_global_" + label + ".json"), to_json(fig2a));
      write_file(out_dir / ("fig2_global_" + label + ".csv"),
                 to_delimited(fig2a));

      per_group.window_h = h1_canonical;
      const BinnedSeries fig2b = build_rdplot(grouped, per_group);
      write_file(out_dir / ("fig2_local_" + label + ".json"), to_json(fig2b));
      write_file(out_dir / ("fig2_local_" + label + ".csv"),
                 to_delimited(fig2b));
    }

    write_file(out_dir / "ledger.txt", outcome.ledger_text);
    write_file(out_dir / "ledger.json", outcome.ledger_json.dump(2));
  }

  return outcome;
}

} // namespace rdd
