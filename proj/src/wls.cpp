#include "rdd/wls.hpp"

#include "rdd/errors.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <cmath>

namespace rdd {

namespace {
constexpr double kRankTol = 1e-10; // relative diagonal threshold on R
} // namespace

HcFlavor hc_from_string(std::string_view name) {
  if (name == "hc0" || name == "HC0") return HcFlavor::hc0;
  if (name == "hc1" || name == "HC1") return HcFlavor::hc1;
  if (name == "hc2" || name == "HC2") return HcFlavor::hc2;
  if (name == "hc3" || name == "HC3") return HcFlavor::hc3;
  throw ValidationError("unknown variance estimator '" + std::string(name) +
                        "' (expected hc0..hc3)");
}

std::string to_string(HcFlavor flavor) {
  switch (flavor) {
    case HcFlavor::hc0: return "hc0";
    case HcFlavor::hc1: return "hc1";
    case HcFlavor::hc2: return "hc2";
    case HcFlavor::hc3: return "hc3";
  }
  return "?";
}

Eigen::VectorXd LocalFit::effective_weights(const Eigen::VectorXd& target) const {
  if (target.size() != design_dim)
    throw ValidationError("effective_weights: target length mismatch");
  // omega = W X (X'WX)^{-1} c
  return weights.asDiagonal() * (design * (xtwx_inv * target));
}

double LocalFit::coef_se(Eigen::Index j) const {
  return std::sqrt(robust_cov(j, j));
}

LocalFit wls_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& w, std::vector<Eigen::Index> rows) {
  const Eigen::Index n_all = X.rows();
  const Eigen::Index k = X.cols();
  if (y.size() != n_all || w.size() != n_all)
    throw ValidationError("wls_fit: row/weight length mismatch");
  if (!rows.empty() && static_cast<Eigen::Index>(rows.size()) != n_all)
    throw ValidationError("wls_fit: row-index length mismatch");
  if ((w.array() < 0.0).any())
    throw ValidationError("wls_fit: negative weights");

  // Keep only positive-weight rows; zero-weight rows carry no information.
  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(n_all));
  for (Eigen::Index i = 0; i < n_all; ++i)
    if (w[i] > 0.0) keep.push_back(i);
  const Eigen::Index n = static_cast<Eigen::Index>(keep.size());
  if (n < k)
    throw ValidationError("wls_fit: " + std::to_string(n) +
                          " positive-weight rows for " + std::to_string(k) +
                          " design columns");

  LocalFit fit;
  fit.design_dim = static_cast<int>(k);
  fit.design.resize(n, k);
  fit.weights.resize(n);
  Eigen::VectorXd y_in(n);
  fit.rows.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index i = keep[static_cast<std::size_t>(r)];
    fit.design.row(r) = X.row(i);
    fit.weights[r] = w[i];
    y_in[r] = y[i];
    fit.rows.push_back(rows.empty() ? i : rows[static_cast<std::size_t>(i)]);
  }

  const Eigen::VectorXd sw = fit.weights.array().sqrt();
  const Eigen::MatrixXd A = sw.asDiagonal() * fit.design;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const double pivot0 = std::abs(R(0, 0));
  if (!(pivot0 > 0.0))
    throw NumericalError("wls_fit: design is identically zero");
  for (Eigen::Index j = 0; j < k; ++j) {
    if (std::abs(R(j, j)) < kRankTol * pivot0) {
      const Eigen::Index offending = qr.colsPermutation().indices()[j];
      throw NumericalError("wls_fit: rank-deficient design, column " +
                           std::to_string(offending) +
                           " is linearly dependent");
    }
  }

  fit.beta = qr.solve(sw.cwiseProduct(y_in));
  fit.residuals = y_in - fit.design * fit.beta;

  // (X'WX)^{-1} = P R^{-1} R^{-T} P'
  const Eigen::MatrixXd r_inv =
      R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  Eigen::MatrixXd inv_unpermuted = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  fit.xtwx_inv = perm * inv_unpermuted * perm.transpose();

  // Leverages from the thin Q factor: span(Q1) = span(sqrt(W) X).
  const Eigen::MatrixXd q_thin =
      qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
  fit.leverages = q_thin.rowwise().squaredNorm();

  return fit;
}

Eigen::MatrixXd sandwich_cov(const LocalFit& fit, HcFlavor flavor,
                             std::vector<Eigen::Index>* fallback_rows) {
  const Eigen::Index n = fit.n();
  const int k = fit.design_dim;
  if (n == 0 || fit.xtwx_inv.size() == 0)
    throw ValidationError("sandwich_cov: fit not populated");

  const double hc1_scale =
      n > k ? static_cast<double>(n) / static_cast<double>(n - k) : 1.0;

  Eigen::VectorXd sigma(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e2 = fit.residuals[i] * fit.residuals[i];
    const double lev = fit.leverages[i];
    const double one_minus = 1.0 - lev;
    double scale = 1.0;
    switch (flavor) {
      case HcFlavor::hc0: scale = 1.0; break;
      case HcFlavor::hc1: scale = hc1_scale; break;
      case HcFlavor::hc2:
      case HcFlavor::hc3: {
        if (one_minus <= 1e-12) {
          // Support point with leverage one: HC2/HC3 are undefined there.
          // Downgrade that row to the HC1 scaling and report it.
          scale = hc1_scale;
          if (fallback_rows) fallback_rows->push_back(fit.rows[static_cast<std::size_t>(i)]);
        } else {
          scale = flavor == HcFlavor::hc2 ? 1.0 / one_minus
                                          : 1.0 / (one_minus * one_minus);
        }
        break;
      }
    }
    sigma[i] = e2 * scale;
  }

  // (X'WX)^{-1} X'W Sigma WX (X'WX)^{-1}; Sigma diagonal.
  const Eigen::MatrixXd xw = fit.weights.asDiagonal() * fit.design;
  const Eigen::MatrixXd meat = xw.transpose() * sigma.asDiagonal() * xw;
  Eigen::MatrixXd cov = fit.xtwx_inv * meat * fit.xtwx_inv;
  cov = 0.5 * (cov + cov.transpose()).eval();
  return cov;
}

void attach_robust_cov(LocalFit& fit, HcFlavor flavor) {
  std::vector<Eigen::Index> fallback;
  fit.robust_cov = sandwich_cov(fit, flavor, &fallback);
  fit.vce = flavor;
  if (!fallback.empty()) {
    fit.hc_fallback_rows = fallback;
    fit.warnings.push_back(
        std::to_string(fallback.size()) +
        " support point(s) with leverage one; HC1 scaling used for those rows");
  }
}

Eigen::MatrixXd classical_cov(const LocalFit& fit) {
  const Eigen::Index n = fit.n();
  const int k = fit.design_dim;
  if (n <= k)
    throw ValidationError("classical_cov: no residual degrees of freedom");
  const double rss_w =
      (fit.weights.array() * fit.residuals.array().square()).sum();
  const double sigma2 = rss_w / static_cast<double>(n - k);
  return sigma2 * fit.xtwx_inv;
}

WaldResult wald_test(const Eigen::VectorXd& estimates,
                     const Eigen::MatrixXd& cov, const Eigen::MatrixXd& R,
                     const Eigen::VectorXd& r) {
  const Eigen::Index q = R.rows();
  if (R.cols() != estimates.size() || r.size() != q)
    throw ValidationError("wald_test: dimension mismatch");
  if (cov.rows() != estimates.size() || cov.cols() != estimates.size())
    throw ValidationError("wald_test: covariance dimension mismatch");

  const Eigen::VectorXd diff = R * estimates - r;
  const Eigen::MatrixXd rvr = R * cov * R.transpose();

  Eigen::FullPivLU<Eigen::MatrixXd> lu(rvr);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible())
    throw NumericalError("wald_test: R cov R' is singular");

  WaldResult out;
  out.statistic = diff.dot(lu.solve(diff));
  if (out.statistic < 0.0 && out.statistic > -1e-12) out.statistic = 0.0;
  out.df = static_cast<int>(q);
  out.p_value = chi_square_sf(out.statistic, out.df);
  return out;
}

double normal_cdf(double z) {
  return boost::math::cdf(boost::math::normal_distribution<double>(), z);
}

double normal_quantile(double prob) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), prob);
}

double chi_square_sf(double statistic, int df) {
  if (statistic <= 0.0) return 1.0;
  const boost::math::chi_squared_distribution<double> dist(df);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

} // namespace rdd
