#include "rdd/report.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace rdd {

std::string format_sig(double value, int sig) {
  if (std::isnan(value)) return "-";
  std::ostringstream out;
  out << std::setprecision(sig) << value;
  return out.str();
}

namespace {

std::string ci_string(const RdEstimate& est) {
  return "[" + format_sig(est.ci_lo) + ", " + format_sig(est.ci_hi) + "]";
}

std::string n_string(const RdEstimate& est) {
  return std::to_string(est.n_left) + " | " + std::to_string(est.n_right);
}

std::string render_rows(const std::vector<std::string>& row_names,
                        const std::vector<std::string>& col_names,
                        const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> widths;
  widths.push_back(0);
  for (const auto& r : row_names) widths[0] = std::max(widths[0], r.size());
  for (std::size_t c = 0; c < col_names.size(); ++c) {
    std::size_t w = col_names[c].size();
    for (const auto& row : cells) w = std::max(w, row[c].size());
    widths.push_back(w);
  }

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(widths[0])) << "";
  for (std::size_t c = 0; c < col_names.size(); ++c)
    out << "  " << std::right << std::setw(static_cast<int>(widths[c + 1]))
        << col_names[c];
  out << "\n";
  for (std::size_t r = 0; r < row_names.size(); ++r) {
    out << std::left << std::setw(static_cast<int>(widths[0])) << row_names[r];
    for (std::size_t c = 0; c < col_names.size(); ++c)
      out << "  " << std::right << std::setw(static_cast<int>(widths[c + 1]))
          << cells[r][c];
    out << "\n";
  }
  return out.str();
}

std::vector<std::vector<std::string>> estimate_cells(
    const std::vector<EstimateColumn>& columns) {
  std::vector<std::vector<std::string>> cells(7);
  for (const auto& col : columns) {
    const RdEstimate& e = col.est;
    cells[0].push_back(format_sig(e.tau));
    cells[1].push_back(ci_string(e));
    cells[2].push_back(col.ci_change_pct ? format_sig(*col.ci_change_pct) : "-");
    cells[3].push_back(format_sig(e.p_value));
    cells[4].push_back(format_sig(e.h_used));
    cells[5].push_back(n_string(e));
    cells[6].push_back(format_sig(e.pct_effect));
  }
  return cells;
}

const std::vector<std::string> kEstimateRows = {
    "tau_hat",     "95% RCI", "CI length change (%)", "p-value",
    "h",           "N- | N+", "% treatment effect"};

} // namespace

std::string render_estimate_table(const std::vector<EstimateColumn>& columns) {
  std::vector<std::string> col_names;
  for (const auto& col : columns) col_names.push_back(col.label);
  return render_rows(kEstimateRows, col_names, estimate_cells(columns));
}

std::string render_hte_table(const std::vector<EstimateColumn>& columns,
                             double equality_p) {
  std::string table = render_estimate_table(columns);
  table += "p-value (heterogeneity): " + format_sig(equality_p) + "\n";
  return table;
}

nlohmann::json to_json(const RdEstimate& est) {
  nlohmann::json j;
  j["tau"] = est.tau;
  j["tau_bc"] = est.tau_bc;
  j["se_robust"] = est.se_robust;
  j["ci"] = {est.ci_lo, est.ci_hi};
  j["p_value"] = est.p_value;
  j["h"] = est.h_used;
  j["b"] = est.b_used;
  j["n_left"] = est.n_left;
  j["n_right"] = est.n_right;
  j["left_intercept"] = est.left_intercept;
  if (std::isnan(est.pct_effect))
    j["pct_effect"] = nullptr;
  else
    j["pct_effect"] = est.pct_effect;
  if (!est.warnings.empty()) j["warnings"] = est.warnings;
  return j;
}

nlohmann::json to_json(const BandwidthReport& report) {
  nlohmann::json j;
  j["h_mse"] = report.h_mse;
  j["pilot"] = {{"sigma2_left", report.pilot.sigma2_left},
                {"sigma2_right", report.pilot.sigma2_right},
                {"deriv_left", report.pilot.deriv_left},
                {"deriv_right", report.pilot.deriv_right},
                {"density_at_cutoff", report.pilot.density_at_cutoff}};
  j["bias_const"] = report.bias_const;
  j["var_const"] = report.var_const;
  j["bias_estimate"] = report.bias_estimate;
  j["bias_se"] = report.bias_se;
  j["regularization_active"] = report.regularization_active;
  return j;
}

nlohmann::json to_json(const HteResult& result) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : result.per_group) {
    nlohmann::json item;
    item["level"] = g.level;
    item["estimate"] = to_json(g.est);
    if (g.bandwidth_selected) item["bandwidth"] = to_json(g.bw);
    groups.push_back(std::move(item));
  }
  nlohmann::json j;
  j["per_group"] = std::move(groups);
  j["equality"] = {{"statistic", result.equality_stat},
                   {"df", result.equality_df},
                   {"p_value", result.equality_p}};
  j["bandwidth_mode"] =
      result.bandwidth_mode == BandwidthMode::separate ? "separate" : "common";
  if (!result.warnings.empty()) j["warnings"] = result.warnings;
  return j;
}

nlohmann::json estimate_table_json(const std::vector<EstimateColumn>& columns) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& col : columns) {
    nlohmann::json item;
    item["label"] = col.label;
    item["estimate"] = to_json(col.est);
    if (col.ci_change_pct)
      item["ci_length_change_pct"] = *col.ci_change_pct;
    else
      item["ci_length_change_pct"] = nullptr;
    cols.push_back(std::move(item));
  }
  return nlohmann::json{{"schema_version", 1}, {"columns", std::move(cols)}};
}

} // namespace rdd
