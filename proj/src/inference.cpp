#include "rdd/inference.hpp"

#include "rdd/bandwidth.hpp"
#include "rdd/errors.hpp"
#include "rdd/wls.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace rdd {

namespace {

void validate_cfg(const InferenceConfig& cfg) {
  if (!(cfg.level > 0.0 && cfg.level < 1.0))
    throw ValidationError("confidence level must lie in (0, 1)");
  if (!(cfg.rho > 0.0)) throw ValidationError("rho must be positive");
}

void append(std::vector<std::string>& into, const std::vector<std::string>& from) {
  into.insert(into.end(), from.begin(), from.end());
}

// Shared tail: CI, p-value, percent effect.
void finish_estimate(RdEstimate& est, double level) {
  const double z = normal_quantile(0.5 + level / 2.0);
  if (est.se_robust > 0.0) {
    est.ci_lo = est.tau_bc - z * est.se_robust;
    est.ci_hi = est.tau_bc + z * est.se_robust;
    est.p_value = 2.0 * normal_cdf(-std::abs(est.tau_bc) / est.se_robust);
  } else {
    est.warnings.push_back("degenerate fit: zero robust standard error");
    est.ci_lo = est.ci_hi = est.tau_bc;
    est.p_value = est.tau_bc == 0.0 ? 1.0 : 0.0;
  }
  if (est.left_intercept != 0.0 && std::isfinite(est.left_intercept))
    est.pct_effect = 100.0 * est.tau / std::abs(est.left_intercept);
  else
    est.warnings.push_back("left limit at the cutoff is zero; percent effect undefined");
}

// HC scaling of a squared residual given its leverage; rows at leverage one
// fall back to the HC1 factor.
double hc_scale(HcFlavor flavor, double leverage, double hc1_factor) {
  const double one_minus = 1.0 - leverage;
  switch (flavor) {
    case HcFlavor::hc0: return 1.0;
    case HcFlavor::hc1: return hc1_factor;
    case HcFlavor::hc2:
      return one_minus > 1e-12 ? 1.0 / one_minus : hc1_factor;
    case HcFlavor::hc3:
      return one_minus > 1e-12 ? 1.0 / (one_minus * one_minus) : hc1_factor;
  }
  return 1.0;
}

} // namespace

RdEstimate estimate_rd(const Dataset& d, const FitSpec& spec,
                       const InferenceConfig& cfg) {
  validate_cfg(cfg);
  if (!(spec.h > 0.0))
    throw ValidationError("estimate_rd: bandwidth not set (select or supply h)");

  const double b = spec.b > 0.0 ? spec.b : spec.h / cfg.rho;
  if (b != spec.h) {
    FitSpec two = spec;
    two.b = b;
    return estimate_rd_twofit(d, two, cfg);
  }

  RdEstimate est;
  est.h_used = spec.h;
  est.b_used = b;

  if (spec.covariates.empty()) {
    const LocalFit left_p = fit_side(d, spec, Side::left, spec.p);
    const LocalFit right_p = fit_side(d, spec, Side::right, spec.p);
    est.tau = intercept_difference(left_p, right_p);
    est.left_intercept = left_p.beta[0];
    est.n_left = left_p.n();
    est.n_right = right_p.n();

    LocalFit left_q = fit_side(d, spec, Side::left, spec.q());
    LocalFit right_q = fit_side(d, spec, Side::right, spec.q());
    attach_robust_cov(left_q, spec.vce);
    attach_robust_cov(right_q, spec.vce);
    est.tau_bc = intercept_difference(left_q, right_q);
    est.se_robust =
        std::sqrt(left_q.robust_cov(0, 0) + right_q.robust_cov(0, 0));

    append(est.warnings, left_p.warnings);
    append(est.warnings, right_p.warnings);
    append(est.warnings, left_q.warnings);
    append(est.warnings, right_q.warnings);
  } else {
    const CovariateFit adj_p = fit_covariate_adjusted(d, spec, spec.p);
    est.tau = adj_p.fit.beta[0];
    est.n_left = adj_p.n_left;
    est.n_right = adj_p.n_right;

    // Percent-effect baseline: the unadjusted left limit at the same h.
    FitSpec canonical = spec;
    canonical.covariates.clear();
    est.left_intercept = fit_side(d, canonical, Side::left, spec.p).beta[0];

    CovariateFit adj_q = fit_covariate_adjusted(d, spec, spec.q());
    attach_robust_cov(adj_q.fit, spec.vce);
    est.tau_bc = adj_q.fit.beta[0];
    est.se_robust = std::sqrt(adj_q.fit.robust_cov(0, 0));

    append(est.warnings, adj_p.fit.warnings);
    append(est.warnings, adj_q.fit.warnings);
  }

  finish_estimate(est, cfg.level);
  return est;
}

RdEstimate estimate_rd_twofit(const Dataset& d, const FitSpec& spec,
                              const InferenceConfig& cfg) {
  validate_cfg(cfg);
  if (!spec.covariates.empty())
    throw ValidationError(
        "the two-fit bias correction supports canonical (covariate-free) "
        "specifications only");
  if (!(spec.h > 0.0))
    throw ValidationError("estimate_rd_twofit: bandwidth not set");
  const double b = spec.bias_bandwidth();
  if (b < spec.h)
    throw ValidationError("two-fit construction requires b >= h");

  FitSpec bias_spec = spec;
  bias_spec.h = b;

  RdEstimate est;
  est.h_used = spec.h;
  est.b_used = b;

  double tau_bc = 0.0;
  double var = 0.0;

  for (const Side side : {Side::left, Side::right}) {
    const double sign = side == Side::right ? 1.0 : -1.0;
    const LocalFit fit_p = fit_side(d, spec, side, spec.p);
    LocalFit fit_q = fit_side(d, bias_spec, side, spec.q());
    attach_robust_cov(fit_q, spec.vce);

    // Finite-sample bias weight of the degree-p fit against x^{p+1}:
    // kappa = e0' (Xp' W Xp)^{-1} Xp' W x^{p+1}.
    Eigen::VectorXd xq(fit_p.n());
    for (Eigen::Index r = 0; r < fit_p.n(); ++r)
      xq[r] = std::pow(fit_p.design(r, 1), spec.p + 1);
    const Eigen::VectorXd a =
        fit_p.xtwx_inv *
        (fit_p.design.transpose() * fit_p.weights.cwiseProduct(xq).matrix());
    const double kappa = a[0];
    const double gamma_q = fit_q.beta[spec.q()];
    const double mu_bc = fit_p.beta[0] - kappa * gamma_q;
    tau_bc += sign * mu_bc;

    // Combined linear-in-y weights over the (wider) bias window.
    std::unordered_map<Eigen::Index, Eigen::Index> pos;
    pos.reserve(fit_q.rows.size());
    for (std::size_t r = 0; r < fit_q.rows.size(); ++r)
      pos.emplace(fit_q.rows[r], static_cast<Eigen::Index>(r));

    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(fit_p.design_dim);
    e0[0] = 1.0;
    const Eigen::VectorXd om_p = fit_p.effective_weights(e0);
    Eigen::VectorXd eq = Eigen::VectorXd::Zero(fit_q.design_dim);
    eq[spec.q()] = 1.0;
    const Eigen::VectorXd om_q = fit_q.effective_weights(eq);

    Eigen::VectorXd omega = -kappa * om_q;
    for (Eigen::Index r = 0; r < fit_p.n(); ++r) {
      const auto it = pos.find(fit_p.rows[static_cast<std::size_t>(r)]);
      if (it == pos.end())
        throw NumericalError(
            "two-fit construction: estimation window escapes the bias window");
      omega[it->second] += om_p[r];
    }

    const double hc1 =
        fit_q.n() > fit_q.design_dim
            ? static_cast<double>(fit_q.n()) /
                  static_cast<double>(fit_q.n() - fit_q.design_dim)
            : 1.0;
    for (Eigen::Index r = 0; r < fit_q.n(); ++r)
      var += omega[r] * omega[r] * fit_q.residuals[r] * fit_q.residuals[r] *
             hc_scale(spec.vce, fit_q.leverages[r], hc1);

    if (side == Side::left) {
      est.left_intercept = fit_p.beta[0];
      est.n_left = fit_p.n();
      est.tau = -fit_p.beta[0];
    } else {
      est.n_right = fit_p.n();
      est.tau += fit_p.beta[0];
    }
    append(est.warnings, fit_q.warnings);
  }

  est.tau_bc = tau_bc;
  est.se_robust = std::sqrt(var);
  finish_estimate(est, cfg.level);
  return est;
}

RdEstimate falsification_estimate(const Dataset& d,
                                  const std::string& covariate, FitSpec spec,
                                  const InferenceConfig& cfg) {
  const Dataset placebo = with_outcome_column(d, covariate);
  spec.covariates.erase(
      std::remove(spec.covariates.begin(), spec.covariates.end(), covariate),
      spec.covariates.end());
  if (!(spec.h > 0.0)) {
    const BandwidthReport bw = select_bandwidth(placebo, spec);
    spec.h = bw.h_mse;
  }
  return estimate_rd(placebo, spec, cfg);
}

} // namespace rdd
