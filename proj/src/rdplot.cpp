#include "rdd/rdplot.hpp"

#include "rdd/errors.hpp"
#include "rdd/wls.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rdd {

namespace {

constexpr int kOverlaySamples = 200;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::MatrixXd polynomial_design(const Eigen::VectorXd& x, int degree) {
  Eigen::MatrixXd X(x.size(), degree + 1);
  X.col(0).setOnes();
  for (int j = 1; j <= degree; ++j)
    X.col(j) = X.col(j - 1).cwiseProduct(x);
  return X;
}

// One side: evenly spaced bins over [lo, hi] plus the unweighted global
// polynomial overlay on the same plotted rows.
SideBins bin_side(const std::vector<double>& xs, const std::vector<double>& ys,
                  double lo, double hi, int bins, int overlay_degree,
                  const char* side_name) {
  const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
  if (n == 0)
    throw ValidationError(std::string("no data in the plotted range ") +
                          side_name + " of the cutoff");
  if (bins < 1) throw ValidationError("bin count must be at least 1");
  if (!(hi > lo)) hi = lo + 1.0; // single support point; one degenerate bin

  SideBins out;
  out.n_plotted = n;
  out.edges.resize(bins + 1);
  out.centers.resize(bins);
  out.means.setConstant(bins, kNaN);
  out.counts.setZero(bins);
  const double width = (hi - lo) / bins;
  for (int j = 0; j <= bins; ++j) out.edges[j] = lo + width * j;
  for (int j = 0; j < bins; ++j)
    out.centers[j] = lo + width * (j + 0.5);

  Eigen::VectorXd sums = Eigen::VectorXd::Zero(bins);
  for (Eigen::Index i = 0; i < n; ++i) {
    int idx = static_cast<int>(std::floor((xs[static_cast<std::size_t>(i)] - lo) / width));
    idx = std::clamp(idx, 0, bins - 1); // last bin closed
    sums[idx] += ys[static_cast<std::size_t>(i)];
    out.counts[idx] += 1;
  }
  for (int j = 0; j < bins; ++j)
    if (out.counts[j] > 0) out.means[j] = sums[j] / out.counts[j];

  // Overlay: plain least squares on the plotted rows, sampled evenly.
  const Eigen::Map<const Eigen::VectorXd> xv(xs.data(), n);
  const Eigen::Map<const Eigen::VectorXd> yv(ys.data(), n);
  out.overlay.degree = overlay_degree;
  const LocalFit fit = wls_fit(polynomial_design(xv, overlay_degree), yv,
                               Eigen::VectorXd::Ones(n));
  out.overlay.x.resize(kOverlaySamples);
  out.overlay.y.resize(kOverlaySamples);
  for (int s = 0; s < kOverlaySamples; ++s) {
    const double pos =
        lo + (hi - lo) * static_cast<double>(s) / (kOverlaySamples - 1);
    double value = fit.beta[0];
    double pw = 1.0;
    for (int j = 1; j <= overlay_degree; ++j) {
      pw *= pos;
      value += fit.beta[j] * pw;
    }
    out.overlay.x[s] = pos;
    out.overlay.y[s] = value;
  }
  return out;
}

} // namespace

int auto_bin_count(Eigen::Index n_side) {
  if (n_side < 10)
    throw ValidationError("auto bin rule needs at least 10 rows on the side");
  const double v = 2.0 * std::pow(static_cast<double>(n_side), 0.4);
  return static_cast<int>(std::ceil(v - 1e-9));
}

BinnedSeries build_rdplot(const Dataset& d, const RdPlotOptions& options) {
  const Dataset* data = &d;
  Dataset filtered;
  if (options.has_subset) {
    const Eigen::VectorXd col = d.column(options.subset_column);
    std::vector<bool> keep(static_cast<std::size_t>(d.n()), false);
    for (Eigen::Index i = 0; i < d.n(); ++i)
      keep[static_cast<std::size_t>(i)] =
          std::isfinite(col[i]) && col[i] == options.subset_value;
    filtered = subset(d, keep);
    data = &filtered;
  }

  std::vector<double> xl, yl, xr, yr;
  for (Eigen::Index i = 0; i < data->n(); ++i) {
    const double xi = data->x[i];
    if (options.window_h > 0.0 && std::abs(xi) > options.window_h) continue;
    if (xi < 0.0) {
      xl.push_back(xi);
      yl.push_back(data->outcome[i]);
    } else {
      xr.push_back(xi);
      yr.push_back(data->outcome[i]);
    }
  }
  if (xl.empty())
    throw ValidationError("no data in the plotted range left of the cutoff");
  if (xr.empty())
    throw ValidationError("no data in the plotted range right of the cutoff");

  double lo_l, hi_l, lo_r, hi_r;
  if (options.window_h > 0.0) {
    lo_l = -options.window_h;
    hi_l = 0.0;
    lo_r = 0.0;
    hi_r = options.window_h;
  } else {
    lo_l = *std::min_element(xl.begin(), xl.end());
    hi_l = 0.0;
    lo_r = 0.0;
    hi_r = *std::max_element(xr.begin(), xr.end());
  }

  const int bins_left =
      options.bins_left > 0 ? options.bins_left
                            : auto_bin_count(static_cast<Eigen::Index>(xl.size()));
  const int bins_right =
      options.bins_right > 0
          ? options.bins_right
          : auto_bin_count(static_cast<Eigen::Index>(xr.size()));

  BinnedSeries series;
  series.cutoff = data->cutoff;
  series.left = bin_side(xl, yl, lo_l, hi_l, bins_left, options.overlay_degree,
                         "left");
  series.right = bin_side(xr, yr, lo_r, hi_r, bins_right,
                          options.overlay_degree, "right");
  series.has_window = options.window_h > 0.0;
  series.window_h = options.window_h;

  // Report positions on the raw score axis.
  const double c = data->cutoff;
  for (SideBins* side : {&series.left, &series.right}) {
    side->edges.array() += c;
    side->centers.array() += c;
    side->overlay.x.array() += c;
  }
  return series;
}

namespace {

nlohmann::json side_to_json(const SideBins& side) {
  nlohmann::json bins = nlohmann::json::array();
  for (Eigen::Index j = 0; j < side.centers.size(); ++j) {
    nlohmann::json bin;
    bin["lo"] = side.edges[j];
    bin["hi"] = side.edges[j + 1];
    bin["center"] = side.centers[j];
    bin["count"] = side.counts[j];
    if (side.counts[j] > 0)
      bin["mean"] = side.means[j];
    else
      bin["mean"] = nullptr;
    bins.push_back(std::move(bin));
  }
  nlohmann::json overlay;
  overlay["degree"] = side.overlay.degree;
  overlay["x"] = std::vector<double>(side.overlay.x.begin(), side.overlay.x.end());
  overlay["y"] = std::vector<double>(side.overlay.y.begin(), side.overlay.y.end());
  return nlohmann::json{{"n_plotted", side.n_plotted},
                        {"bins", std::move(bins)},
                        {"overlay", std::move(overlay)}};
}

} // namespace

std::string to_json(const BinnedSeries& series) {
  nlohmann::json j;
  j["schema_version"] = series.schema_version;
  j["cutoff"] = series.cutoff;
  j["left"] = side_to_json(series.left);
  j["right"] = side_to_json(series.right);
  if (series.has_window) {
    j["window"] = {{"h", series.window_h},
                   {"lo", series.cutoff - series.window_h},
                   {"hi", series.cutoff + series.window_h}};
  } else {
    j["window"] = nullptr;
  }
  return j.dump(2);
}

std::string to_delimited(const BinnedSeries& series, char delimiter) {
  std::ostringstream out;
  out.precision(12);
  const char d = delimiter;
  out << "# rdplot schema_version=" << series.schema_version
      << " cutoff=" << series.cutoff;
  if (series.has_window)
    out << " window_lo=" << series.cutoff - series.window_h
        << " window_hi=" << series.cutoff + series.window_h;
  out << "\n";
  out << "kind" << d << "side" << d << "index" << d << "lo" << d << "hi" << d
      << "center" << d << "count" << d << "value\n";
  const auto emit_side = [&](const SideBins& side, const char* name) {
    for (Eigen::Index j = 0; j < side.centers.size(); ++j) {
      out << "bin" << d << name << d << j << d << side.edges[j] << d
          << side.edges[j + 1] << d << side.centers[j] << d << side.counts[j]
          << d;
      if (side.counts[j] > 0) out << side.means[j];
      out << "\n";
    }
    for (Eigen::Index s = 0; s < side.overlay.x.size(); ++s)
      out << "overlay" << d << name << d << s << d << d << d
          << side.overlay.x[s] << d << d << side.overlay.y[s] << "\n";
  };
  emit_side(series.left, "left");
  emit_side(series.right, "right");
  return out.str();
}

} // namespace rdd
