#pragma once

#include "rdd/bandwidth.hpp"
#include "rdd/heterogeneity.hpp"
#include "rdd/local_fit.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace rdd {

// One column of an estimate table: a labeled estimate plus the CI-length
// change against the table's canonical column.
struct EstimateColumn {
  std::string label;
  RdEstimate est;
  std::optional<double> ci_change_pct;
};

/// Number formatted to `sig` significant digits; text and JSON surfaces use
/// the same formatting so their values agree.
std::string format_sig(double value, int sig = 6);

/// Aligned text table in row order: tau, 95% RCI, CI length change, p-value,
/// h, N- | N+, % treatment effect.
std::string render_estimate_table(const std::vector<EstimateColumn>& columns);

/// Two-row-per-group text table for heterogeneity results with the
/// equality-test p-value footer.
std::string render_hte_table(const std::vector<EstimateColumn>& columns,
                             double equality_p);

nlohmann::json to_json(const RdEstimate& est);
nlohmann::json to_json(const BandwidthReport& report);
nlohmann::json to_json(const HteResult& result);
nlohmann::json estimate_table_json(const std::vector<EstimateColumn>& columns);

} // namespace rdd
