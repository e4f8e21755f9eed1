#pragma once

#include "rdd/dataset.hpp"
#include "rdd/kernels.hpp"
#include "rdd/wls.hpp"

#include <limits>
#include <string>
#include <vector>

namespace rdd {

// Estimation recipe for one cutoff analysis. The bias degree is always
// q = p + 1 and the bias bandwidth defaults to b = h.
struct FitSpec {
  int p = 1;
  KernelKind kernel = KernelKind::triangular;
  double h = 0.0; // main bandwidth; must be positive before fitting
  double b = 0.0; // bias bandwidth; 0 means b = h
  HcFlavor vce = HcFlavor::hc3;
  std::vector<std::string> covariates;

  int q() const { return p + 1; }
  double bias_bandwidth() const { return b > 0.0 ? b : h; }
};

struct RdEstimate {
  double tau = std::numeric_limits<double>::quiet_NaN();    // conventional
  double tau_bc = std::numeric_limits<double>::quiet_NaN(); // bias-corrected
  double se_robust = std::numeric_limits<double>::quiet_NaN();
  double ci_lo = std::numeric_limits<double>::quiet_NaN();
  double ci_hi = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();
  double h_used = std::numeric_limits<double>::quiet_NaN();
  double b_used = std::numeric_limits<double>::quiet_NaN();
  Eigen::Index n_left = 0;  // effective sample size, x < 0
  Eigen::Index n_right = 0; // effective sample size, x >= 0
  double left_intercept = std::numeric_limits<double>::quiet_NaN(); // mu_-
  double pct_effect = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;

  double ci_length() const { return ci_hi - ci_lo; }
};

/// One-sided kernel-weighted polynomial fit of the outcome on
/// (1, x, ..., x^degree). The intercept estimates the side's limit at the
/// cutoff. Requires at least degree + 2 positive-weight rows on the side.
LocalFit fit_side(const Dataset& d, const FitSpec& spec, Side side,
                  int degree);

/// tau_hat = right intercept - left intercept.
double intercept_difference(const LocalFit& left, const LocalFit& right);

/// Pooled fully interacted regression on
/// (T, 1, x, ..., x^degree, T x, ..., T x^degree) with T = 1{x >= 0}. Its
/// T coefficient equals the separate-fits intercept difference exactly.
LocalFit fit_pooled_interacted(const Dataset& d, const FitSpec& spec,
                               int degree);

// Covariate-adjusted pooled fit: same interacted polynomial basis plus the
// covariate columns with a single coefficient vector common to both sides.
// The T coefficient (beta[0]) is the covariate-adjusted RD estimate.
struct CovariateFit {
  LocalFit fit;
  std::vector<std::string> used;    // covariates that entered the design
  std::vector<std::string> dropped; // zero variance inside the window
  Eigen::Index n_left = 0;          // complete-case positive-weight rows
  Eigen::Index n_right = 0;
};

CovariateFit fit_covariate_adjusted(const Dataset& d, const FitSpec& spec,
                                    int degree);

// Column layout of the pooled designs, shared with the inference module.
// [T | 1, x, ..., x^degree | T x, ..., T x^degree | covariates...]
inline int pooled_base_cols(int degree) { return 2 * degree + 2; }

} // namespace rdd
