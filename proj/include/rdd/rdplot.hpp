#pragma once

#include "rdd/dataset.hpp"

#include <string>

namespace rdd {

struct OverlaySeries {
  int degree = 1;
  Eigen::VectorXd x; // 200 evenly spaced sample positions per side
  Eigen::VectorXd y; // fitted values of the unweighted global fit
};

struct SideBins {
  Eigen::VectorXd edges;   // bin count + 1 edges over the plotted range
  Eigen::VectorXd centers; // midpoints
  Eigen::VectorXd means;   // NaN for empty bins
  Eigen::VectorXi counts;
  Eigen::Index n_plotted = 0;
  OverlaySeries overlay;
};

struct BinnedSeries {
  int schema_version = 1;
  double cutoff = 0.0;
  SideBins left;
  SideBins right;
  bool has_window = false;
  double window_h = 0.0; // plotted range is [c-h, c+h] when has_window
};

struct RdPlotOptions {
  int bins_left = 0;  // 0 = auto rule
  int bins_right = 0; // 0 = auto rule
  int overlay_degree = 1;
  double window_h = 0.0; // 0 = global plot over the full support
  std::string subset_column; // optional group filter
  double subset_value = 0.0;
  bool has_subset = false;
};

/// Default per-side bin count: ceil(2 n^{2/5}) evenly spaced bins. Requires
/// at least 10 rows on the side.
int auto_bin_count(Eigen::Index n_side);

/// Evenly spaced binned means of the outcome per side, with an unweighted
/// global polynomial overlay sampled at 200 points per side. Local plots
/// (window_h > 0) restrict both bins and overlay to [c-h, c+h].
BinnedSeries build_rdplot(const Dataset& d, const RdPlotOptions& options = {});

std::string to_json(const BinnedSeries& series);
std::string to_delimited(const BinnedSeries& series, char delimiter = ',');

} // namespace rdd
