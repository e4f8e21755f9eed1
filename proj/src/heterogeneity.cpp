#include "rdd/heterogeneity.hpp"

#include "rdd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rdd {

namespace {

constexpr std::size_t kMaxGroupLevels = 20;

Eigen::VectorXd group_values(const Dataset& d, const std::string& group_col) {
  if (d.has_group() && group_col == d.group_name) return d.group;
  return d.column(group_col);
}

std::vector<double> distinct_levels(const Eigen::VectorXd& g) {
  std::vector<double> levels;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (std::isfinite(g[i])) levels.push_back(g[i]);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  return levels;
}

std::string level_label(double level) {
  std::ostringstream out;
  out << level;
  return out.str();
}

} // namespace

const GroupEstimate* HteResult::find(double level) const {
  for (const auto& g : per_group)
    if (g.level == level) return &g;
  return nullptr;
}

HteResult estimate_hte(const Dataset& d, const std::string& group_col,
                       const FitSpec& spec, const InferenceConfig& cfg,
                       const HteOptions& options) {
  const Eigen::VectorXd g = group_values(d, group_col);
  const std::vector<double> levels = distinct_levels(g);
  if (levels.size() < 2)
    throw ValidationError("group '" + group_col + "' has " +
                          std::to_string(levels.size()) +
                          " level(s); heterogeneity analysis needs at least 2");
  if (levels.size() > kMaxGroupLevels)
    throw ValidationError("group '" + group_col +
                          "' has too many levels to be treated as discrete");
  for (const auto& cov : spec.covariates)
    if (cov == group_col)
      throw ValidationError("covariate set must exclude the group variable '" +
                            group_col + "'");

  HteResult result;
  result.bandwidth_mode = options.mode;

  double common_h = 0.0;
  if (options.mode == BandwidthMode::common) {
    result.warnings.push_back(
        "a common bandwidth across groups is generally discouraged: the "
        "bias-variance trade-off may differ across subsamples");
    if (options.common_h > 0.0) {
      common_h = options.common_h;
    } else if (spec.h > 0.0) {
      common_h = spec.h;
    } else {
      const BandwidthReport bw = select_bandwidth(d, spec);
      common_h = bw.h_mse;
    }
  }

  for (const double level : levels) {
    Dataset sub = d;
    {
      std::vector<bool> keep(static_cast<std::size_t>(d.n()), false);
      for (Eigen::Index i = 0; i < d.n(); ++i)
        keep[static_cast<std::size_t>(i)] =
            std::isfinite(g[i]) && g[i] == level;
      sub = subset(d, keep);
    }

    GroupEstimate ge;
    ge.level = level;
    FitSpec group_spec = spec;
    try {
      if (options.mode == BandwidthMode::common) {
        group_spec.h = common_h;
      } else {
        const auto it = options.fixed_h.find(level);
        if (it != options.fixed_h.end()) {
          group_spec.h = it->second;
        } else {
          ge.bw = select_bandwidth(sub, group_spec);
          ge.bandwidth_selected = true;
          group_spec.h = ge.bw.h_mse;
        }
      }
      group_spec.b = 0.0; // b = h within each group
      ge.est = estimate_rd(sub, group_spec, cfg);
    } catch (const ValidationError& err) {
      throw ValidationError("group " + group_col + " = " + level_label(level) +
                            ": " + err.what());
    }
    result.per_group.push_back(std::move(ge));
  }

  const Eigen::Index k = static_cast<Eigen::Index>(result.per_group.size());
  result.joint_cov = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double se = result.per_group[static_cast<std::size_t>(i)].est.se_robust;
    result.joint_cov(i, i) = se * se;
  }

  const WaldResult eq = test_effect_equality(result);
  result.equality_stat = eq.statistic;
  result.equality_df = eq.df;
  result.equality_p = eq.p_value;
  return result;
}

HteResult estimate_hte_with_covariates(const Dataset& d,
                                       const std::string& group_col,
                                       const std::vector<std::string>& covariates,
                                       FitSpec spec, const InferenceConfig& cfg,
                                       const HteOptions& options) {
  std::string source_col;
  {
    // A group made by discretize_covariate is named <source>_ge_<threshold>.
    const auto pos = group_col.find("_ge_");
    if (pos != std::string::npos) source_col = group_col.substr(0, pos);
  }
  for (const auto& cov : covariates) {
    if (cov == group_col)
      throw ValidationError("covariates for efficiency must exclude the group "
                            "variable '" + group_col + "'");
    if (!source_col.empty() && cov == source_col)
      throw ValidationError("covariates for efficiency must exclude '" + cov +
                            "', the source of the group variable");
  }
  spec.covariates = covariates;
  return estimate_hte(d, group_col, spec, cfg, options);
}

WaldResult test_effect_equality(const HteResult& result) {
  const Eigen::Index k = static_cast<Eigen::Index>(result.per_group.size());
  if (k < 2)
    throw ValidationError("equality test needs at least two group estimates");

  Eigen::VectorXd tau(k);
  for (Eigen::Index i = 0; i < k; ++i)
    tau[i] = result.per_group[static_cast<std::size_t>(i)].est.tau_bc;

  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(k - 1, k);
  for (Eigen::Index i = 0; i < k - 1; ++i) {
    R(i, 0) = -1.0;
    R(i, i + 1) = 1.0;
  }
  return wald_test(tau, result.joint_cov, R,
                   Eigen::VectorXd::Zero(k - 1));
}

LocalFit interacted_joint_fit(const Dataset& d, const std::string& group_col,
                              const FitSpec& spec, int degree) {
  if (!(spec.h > 0.0))
    throw ValidationError("interacted_joint_fit: bandwidth not set");
  const Eigen::VectorXd g = group_values(d, group_col);
  const std::vector<double> levels = distinct_levels(g);
  if (levels.size() < 2)
    throw ValidationError("interacted_joint_fit: need at least two group levels");

  const LocalWeights lw = localized_weights(d.x, spec.kernel, spec.h, Side::both);
  std::vector<Eigen::Index> rows;
  for (std::size_t r = 0; r < lw.index.size(); ++r)
    if (std::isfinite(g[lw.index[r]])) rows.push_back(static_cast<Eigen::Index>(r));

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const int block = pooled_base_cols(degree);
  const int k = block * static_cast<int>(levels.size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, k);
  Eigen::VectorXd y(n), w(n);
  std::vector<Eigen::Index> data_rows(static_cast<std::size_t>(n));

  for (Eigen::Index rr = 0; rr < n; ++rr) {
    const Eigen::Index r = rows[static_cast<std::size_t>(rr)];
    const Eigen::Index i = lw.index[static_cast<std::size_t>(r)];
    const double xi = d.x[i];
    const double t = xi >= 0.0 ? 1.0 : 0.0;
    const auto lvl = static_cast<std::size_t>(
        std::find(levels.begin(), levels.end(), g[i]) - levels.begin());
    const int off = block * static_cast<int>(lvl);
    X(rr, off + 0) = t;
    X(rr, off + 1) = 1.0;
    double pw = 1.0;
    for (int j = 1; j <= degree; ++j) {
      pw *= xi;
      X(rr, off + 1 + j) = pw;
      X(rr, off + 1 + degree + j) = t * pw;
    }
    y[rr] = d.outcome[i];
    w[rr] = lw.w[r];
    data_rows[static_cast<std::size_t>(rr)] = i;
  }

  return wls_fit(X, y, w, data_rows);
}

ContinuousHteResult estimate_hte_continuous(const Dataset& d,
                                            const std::string& covariate,
                                            const FitSpec& spec) {
  if (!(spec.h > 0.0))
    throw ValidationError("estimate_hte_continuous: bandwidth not set");
  const Eigen::VectorXd z = d.column(covariate);
  const LocalWeights lw = localized_weights(d.x, spec.kernel, spec.h, Side::both);

  std::vector<Eigen::Index> rows;
  double wsum = 0.0, zsum = 0.0;
  for (std::size_t r = 0; r < lw.index.size(); ++r) {
    const Eigen::Index i = lw.index[r];
    if (!std::isfinite(z[i])) continue;
    rows.push_back(static_cast<Eigen::Index>(r));
    wsum += lw.w[static_cast<Eigen::Index>(r)];
    zsum += lw.w[static_cast<Eigen::Index>(r)] * z[i];
  }
  if (rows.empty())
    throw ValidationError("no complete-case rows for moderator '" + covariate + "'");
  const double z_mean = zsum / wsum;

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const int base = pooled_base_cols(spec.p);
  const int k = base + 2;
  Eigen::MatrixXd X(n, k);
  Eigen::VectorXd y(n), w(n);
  for (Eigen::Index rr = 0; rr < n; ++rr) {
    const Eigen::Index r = rows[static_cast<std::size_t>(rr)];
    const Eigen::Index i = lw.index[static_cast<std::size_t>(r)];
    const double xi = d.x[i];
    const double t = xi >= 0.0 ? 1.0 : 0.0;
    X(rr, 0) = t;
    X(rr, 1) = 1.0;
    double pw = 1.0;
    for (int j = 1; j <= spec.p; ++j) {
      pw *= xi;
      X(rr, 1 + j) = pw;
      X(rr, 1 + spec.p + j) = t * pw;
    }
    const double zc = z[i] - z_mean;
    X(rr, base) = zc;
    X(rr, base + 1) = t * zc;
    y[rr] = d.outcome[i];
    w[rr] = lw.w[r];
  }

  LocalFit fit = wls_fit(X, y, w);
  attach_robust_cov(fit, spec.vce);

  ContinuousHteResult out;
  out.tau_at_mean = fit.beta[0];
  out.interaction = fit.beta[base + 1];
  out.interaction_se = fit.coef_se(base + 1);
  out.interaction_p =
      out.interaction_se > 0.0
          ? 2.0 * normal_cdf(-std::abs(out.interaction / out.interaction_se))
          : (out.interaction == 0.0 ? 1.0 : 0.0);
  out.moderator_mean = z_mean;
  return out;
}

} // namespace rdd
