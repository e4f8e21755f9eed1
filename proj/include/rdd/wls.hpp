#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace rdd {

enum class HcFlavor { hc0, hc1, hc2, hc3 };

HcFlavor hc_from_string(std::string_view name);
std::string to_string(HcFlavor flavor);

// One solved weighted least squares problem. Only rows with strictly
// positive weight enter the solve; `rows` maps them back to the caller's
// indexing (empty when the caller fitted a plain matrix).
struct LocalFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd residuals; // y - X beta, per included row
  Eigen::VectorXd leverages; // diagonal of the weighted hat matrix
  Eigen::MatrixXd robust_cov; // filled by sandwich_cov / callers
  int design_dim = 0;

  Eigen::MatrixXd design;   // included rows of X
  Eigen::VectorXd weights;  // included weights
  Eigen::MatrixXd xtwx_inv; // (X'WX)^{-1}
  std::vector<Eigen::Index> rows;

  HcFlavor vce = HcFlavor::hc3;
  std::vector<Eigen::Index> hc_fallback_rows; // leverage-one rows downgraded to HC1
  std::vector<std::string> warnings;

  Eigen::Index n() const { return design.rows(); }

  /// Weights omega with target'beta == sum_i omega_i y_i for the rows of
  /// this fit. Exact on the training outcomes up to roundoff.
  Eigen::VectorXd effective_weights(const Eigen::VectorXd& target) const;

  double coef_se(Eigen::Index j) const;
};

/// Solves min_b sum_i w_i (y_i - X_i b)^2 through a column-pivoted QR of the
/// sqrt(w)-scaled design. Rank deficiency (relative diagonal tolerance 1e-10)
/// throws NumericalError naming the offending column.
LocalFit wls_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& w,
                 std::vector<Eigen::Index> rows = {});

/// Heteroskedasticity-robust sandwich covariance
///   (X'WX)^{-1} X'W Sigma WX (X'WX)^{-1}
/// with diagonal Sigma: e^2 (HC0), e^2 n/(n-k) (HC1), e^2/(1-l) (HC2),
/// e^2/(1-l)^2 (HC3). Support points with leverage one fall back to the HC1
/// scaling for that row only; the rows are recorded in `fallback_rows`.
Eigen::MatrixXd sandwich_cov(const LocalFit& fit, HcFlavor flavor,
                             std::vector<Eigen::Index>* fallback_rows = nullptr);

/// Applies sandwich_cov and stores the result (plus fallback bookkeeping)
/// on the fit.
void attach_robust_cov(LocalFit& fit, HcFlavor flavor);

/// Classical covariance sigma2 (X'WX)^{-1} with sigma2 = RSS_w / (n - k);
/// used by the unweighted pilot regressions.
Eigen::MatrixXd classical_cov(const LocalFit& fit);

struct WaldResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

/// Wald test of R theta = r against a chi-square with rows(R) degrees of
/// freedom. The scaled statistic W/df is the "robust F" form with infinite
/// denominator degrees of freedom.
WaldResult wald_test(const Eigen::VectorXd& estimates,
                     const Eigen::MatrixXd& cov, const Eigen::MatrixXd& R,
                     const Eigen::VectorXd& r);

// Standard normal helpers shared by the inference modules.
double normal_cdf(double z);
double normal_quantile(double prob);
double chi_square_sf(double statistic, int df);

} // namespace rdd
