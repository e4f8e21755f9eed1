#include "rdd/bandwidth.hpp"

#include "rdd/errors.hpp"
#include "rdd/kernels.hpp"
#include "rdd/wls.hpp"

#include <cmath>

namespace rdd {

namespace {

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

Eigen::MatrixXd polynomial_design(const Eigen::VectorXd& x, int degree) {
  Eigen::MatrixXd X(x.size(), degree + 1);
  X.col(0).setOnes();
  for (int j = 1; j <= degree; ++j)
    X.col(j) = X.col(j - 1).cwiseProduct(x);
  return X;
}

struct PilotFit {
  double coef_left = 0.0;  // x^{p+1} coefficient, left limit
  double coef_right = 0.0; // x^{p+1} coefficient, right limit
  double var_comb = 0.0;   // Var(coef_right - (-1)^{p+1} coef_left)
  double sigma2_left = 0.0;
  double sigma2_right = 0.0;
};

// Side-wise global polynomial pilots of degree p+3. sigma2 uses the
// spec denominator n_side - p - 4.
PilotFit canonical_pilot(const Dataset& d, int p) {
  const int degree = p + 3;
  PilotFit out;
  const double sign = (p + 1) % 2 == 0 ? 1.0 : -1.0; // (-1)^{p+1}

  double vl = 0.0, vr = 0.0;
  for (const Side side : {Side::left, Side::right}) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      const bool right = d.x[i] >= 0.0;
      if ((side == Side::right) == right) rows.push_back(i);
    }
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    if (n < degree + 2)
      throw ValidationError("bandwidth pilot: fewer than " +
                            std::to_string(degree + 2) + " rows " +
                            (side == Side::left ? "left" : "right") +
                            " of the cutoff");
    Eigen::VectorXd xs(n), ys(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      xs[r] = d.x[rows[static_cast<std::size_t>(r)]];
      ys[r] = d.outcome[rows[static_cast<std::size_t>(r)]];
    }
    const LocalFit fit =
        wls_fit(polynomial_design(xs, degree), ys, Eigen::VectorXd::Ones(n));
    const double rss = fit.residuals.squaredNorm();
    const double sigma2 = rss / static_cast<double>(n - degree - 1);
    const double coef_var = classical_cov(fit)(p + 1, p + 1);
    if (side == Side::left) {
      out.coef_left = fit.beta[p + 1];
      out.sigma2_left = sigma2;
      vl = coef_var;
    } else {
      out.coef_right = fit.beta[p + 1];
      out.sigma2_right = sigma2;
      vr = coef_var;
    }
  }
  out.var_comb = vr + sign * sign * vl;
  return out;
}

// Pooled pilot with the covariates entering under a common coefficient, so
// the selected bandwidth responds to the adjustment. Polynomial terms are
// fully interacted with the treatment side.
PilotFit covariate_pilot(const Dataset& d, const FitSpec& spec) {
  const int p = spec.p;
  const int degree = p + 3;

  std::vector<Eigen::Index> cov_cols;
  for (const auto& name : spec.covariates) {
    const Eigen::Index j = d.covariate_index(name);
    if (j < 0) throw ValidationError("unknown covariate '" + name + "'");
    cov_cols.push_back(j);
  }

  // Complete cases; constant columns dropped as in the estimation fits.
  std::vector<Eigen::Index> used;
  for (const Eigen::Index c : cov_cols) {
    double mn = std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      const double v = d.covariates(i, c);
      if (!std::isfinite(v)) continue;
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    if (mn < mx) used.push_back(c);
  }

  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    bool ok = true;
    for (const Eigen::Index c : used)
      if (!std::isfinite(d.covariates(i, c))) { ok = false; break; }
    if (ok) rows.push_back(i);
  }

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const int base = 2 * (degree + 1); // poly block + interacted block + T
  const int k = base + static_cast<int>(used.size());
  Eigen::Index n_left = 0, n_right = 0;
  Eigen::MatrixXd X(n, k);
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index i = rows[static_cast<std::size_t>(r)];
    const double xi = d.x[i];
    const double t = xi >= 0.0 ? 1.0 : 0.0;
    (t > 0.0 ? n_right : n_left) += 1;
    X(r, 0) = 1.0;
    double pw = 1.0;
    for (int j = 1; j <= degree; ++j) {
      pw *= xi;
      X(r, j) = pw;
    }
    X(r, degree + 1) = t;
    pw = 1.0;
    for (int j = 1; j <= degree; ++j) {
      pw *= xi;
      X(r, degree + 1 + j) = t * pw;
    }
    for (std::size_t c = 0; c < used.size(); ++c)
      X(r, base + static_cast<int>(c)) = d.covariates(i, used[c]);
    y[r] = d.outcome[i];
  }
  if (n_left < degree + 2 || n_right < degree + 2)
    throw ValidationError("bandwidth pilot: insufficient complete-case rows per side");

  const LocalFit fit = wls_fit(X, y, Eigen::VectorXd::Ones(n));

  PilotFit out;
  const double sign = (p + 1) % 2 == 0 ? 1.0 : -1.0;
  out.coef_left = fit.beta[p + 1];
  out.coef_right = fit.beta[p + 1] + fit.beta[degree + 1 + (p + 1)];

  // g'beta = coef_right - (-1)^{p+1} coef_left
  Eigen::VectorXd g = Eigen::VectorXd::Zero(k);
  g[p + 1] = 1.0 - sign;
  g[degree + 1 + (p + 1)] = 1.0;
  const Eigen::MatrixXd cov = classical_cov(fit);
  out.var_comb = g.dot(cov * g);

  double rss_l = 0.0, rss_r = 0.0;
  Eigen::Index nl = 0, nr = 0;
  for (Eigen::Index r = 0; r < fit.n(); ++r) {
    const double e2 = fit.residuals[r] * fit.residuals[r];
    if (fit.design(r, degree + 1) > 0.0) {
      rss_r += e2;
      ++nr;
    } else {
      rss_l += e2;
      ++nl;
    }
  }
  out.sigma2_left = rss_l / static_cast<double>(nl - degree - 1);
  out.sigma2_right = rss_r / static_cast<double>(nr - degree - 1);
  return out;
}

} // namespace

BandwidthReport select_bandwidth(const Dataset& d, const FitSpec& spec) {
  const int p = spec.p;
  if (p < 0) throw ValidationError("polynomial degree must be nonnegative");
  const Eigen::Index n = d.n();
  if (d.n_left() < p + 3 || d.n_right() < p + 3)
    throw ValidationError("bandwidth selection needs at least p+3 rows per side");

  const KernelMoments km = boundary_moments(spec.kernel, p);

  const PilotFit pilot =
      spec.covariates.empty() ? canonical_pilot(d, p) : covariate_pilot(d, spec);

  // Symmetric uniform-kernel density pilot at the cutoff.
  const double mean_x = d.x.mean();
  const double sd_x = std::sqrt((d.x.array() - mean_x).square().sum() /
                                static_cast<double>(n - 1));
  const double window =
      1.84 * sd_x * std::pow(static_cast<double>(n), -0.2);
  if (!(window > 0.0))
    throw NumericalError("bandwidth selection: degenerate score spread");
  const Eigen::Index in_window = (d.x.array().abs() <= window).count();
  if (in_window == 0)
    throw NumericalError("bandwidth selection: no observations in the density pilot window");
  const double density = static_cast<double>(in_window) /
                         (2.0 * window * static_cast<double>(n));

  const double sign = (p + 1) % 2 == 0 ? 1.0 : -1.0; // (-1)^{p+1}
  const double bias_estimate =
      km.bias_const * (pilot.coef_right - sign * pilot.coef_left);
  const double bias_var = km.bias_const * km.bias_const * pilot.var_comb;
  const double lambda = 9.0 * bias_var; // (3 se(B))^2

  const double variance_term =
      km.var_const * (pilot.sigma2_left + pilot.sigma2_right) / density;
  if (!(variance_term > 0.0))
    throw NumericalError(
        "bandwidth selection: zero pilot residual variance; supply h explicitly");

  const double denom = bias_estimate * bias_estimate + lambda;
  if (!(denom > 0.0))
    throw NumericalError(
        "bandwidth selection: curvature and regularizer both vanish; supply h explicitly");

  BandwidthReport report;
  report.pilot.sigma2_left = pilot.sigma2_left;
  report.pilot.sigma2_right = pilot.sigma2_right;
  report.pilot.deriv_left = factorial(p + 1) * pilot.coef_left;
  report.pilot.deriv_right = factorial(p + 1) * pilot.coef_right;
  report.pilot.density_at_cutoff = density;
  report.bias_const = km.bias_const;
  report.var_const = km.var_const;
  report.bias_estimate = bias_estimate;
  report.bias_se = std::sqrt(bias_var);
  report.regularization_active = lambda > bias_estimate * bias_estimate;
  if (report.regularization_active)
    report.warnings.push_back(
        "pilot curvature is weak relative to its standard error; "
        "bandwidth regularization is active");

  report.h_mse = std::pow(
      variance_term /
          (2.0 * (p + 1) * denom * static_cast<double>(n)),
      1.0 / (2.0 * p + 3.0));
  return report;
}

double ci_length_change_pct(const RdEstimate& canonical,
                            const RdEstimate& adjusted) {
  return 100.0 * (adjusted.ci_length() / canonical.ci_length() - 1.0);
}

} // namespace rdd
