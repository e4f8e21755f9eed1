#include "rdd/local_fit.hpp"

#include "rdd/errors.hpp"

#include <cmath>
#include <sstream>

namespace rdd {

namespace {

constexpr double kConditionWarn = 1e8;

Eigen::MatrixXd polynomial_design(const Eigen::VectorXd& x, int degree) {
  Eigen::MatrixXd X(x.size(), degree + 1);
  X.col(0).setOnes();
  for (int j = 1; j <= degree; ++j)
    X.col(j) = X.col(j - 1).cwiseProduct(x);
  return X;
}

// Crude condition proxy from the column norms of the weighted design; a QR
// diagnostic would be tighter but this is only used to print a warning.
void warn_if_ill_conditioned(LocalFit& fit) {
  const Eigen::VectorXd sw = fit.weights.array().sqrt();
  const Eigen::MatrixXd a = sw.asDiagonal() * fit.design;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd;
  if (a.rows() > 2000) return; // cheap fits only; large designs are well scaled
  svd.compute(a);
  const auto& s = svd.singularValues();
  if (s.size() > 0 && s[s.size() - 1] > 0.0 &&
      s[0] / s[s.size() - 1] > kConditionWarn) {
    std::ostringstream msg;
    msg << "weighted design condition number "
        << static_cast<double>(s[0] / s[s.size() - 1]) << " exceeds 1e8";
    fit.warnings.push_back(msg.str());
  }
}

} // namespace

LocalFit fit_side(const Dataset& d, const FitSpec& spec, Side side,
                  int degree) {
  if (side == Side::both)
    throw ValidationError("fit_side expects left or right");
  if (!(spec.h > 0.0)) throw ValidationError("fit_side: bandwidth not set");

  const LocalWeights lw = localized_weights(d.x, spec.kernel, spec.h, side);
  const Eigen::Index n = static_cast<Eigen::Index>(lw.index.size());
  if (n < degree + 2)
    throw ValidationError(
        "insufficient data " + std::string(side == Side::left ? "left" : "right") +
        " of the cutoff: " + std::to_string(n) + " positive-weight rows for degree " +
        std::to_string(degree));

  Eigen::VectorXd xs(n), ys(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    xs[r] = d.x[lw.index[static_cast<std::size_t>(r)]];
    ys[r] = d.outcome[lw.index[static_cast<std::size_t>(r)]];
  }

  LocalFit fit = wls_fit(polynomial_design(xs, degree), ys, lw.w, lw.index);
  warn_if_ill_conditioned(fit);
  return fit;
}

double intercept_difference(const LocalFit& left, const LocalFit& right) {
  return right.beta[0] - left.beta[0];
}

LocalFit fit_pooled_interacted(const Dataset& d, const FitSpec& spec,
                               int degree) {
  if (!(spec.h > 0.0))
    throw ValidationError("fit_pooled_interacted: bandwidth not set");
  const LocalWeights lw = localized_weights(d.x, spec.kernel, spec.h, Side::both);
  const Eigen::Index n = static_cast<Eigen::Index>(lw.index.size());

  const int k = pooled_base_cols(degree);
  Eigen::MatrixXd X(n, k);
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index i = lw.index[static_cast<std::size_t>(r)];
    const double xi = d.x[i];
    const double t = xi >= 0.0 ? 1.0 : 0.0;
    X(r, 0) = t;
    X(r, 1) = 1.0;
    double pw = 1.0;
    for (int j = 1; j <= degree; ++j) {
      pw *= xi;
      X(r, 1 + j) = pw;
      X(r, 1 + degree + j) = t * pw;
    }
    y[r] = d.outcome[i];
  }

  LocalFit fit = wls_fit(X, y, lw.w, lw.index);
  warn_if_ill_conditioned(fit);
  return fit;
}

CovariateFit fit_covariate_adjusted(const Dataset& d, const FitSpec& spec,
                                    int degree) {
  if (spec.covariates.empty())
    throw ValidationError("fit_covariate_adjusted: empty covariate set");
  if (!(spec.h > 0.0))
    throw ValidationError("fit_covariate_adjusted: bandwidth not set");

  const LocalWeights lw = localized_weights(d.x, spec.kernel, spec.h, Side::both);

  std::vector<Eigen::Index> cov_cols;
  cov_cols.reserve(spec.covariates.size());
  for (const auto& name : spec.covariates) {
    const Eigen::Index j = d.covariate_index(name);
    if (j < 0) throw ValidationError("unknown covariate '" + name + "'");
    cov_cols.push_back(j);
  }

  CovariateFit out;

  // Complete cases over the requested covariates inside the window.
  auto complete_rows = [&](const std::vector<Eigen::Index>& cols) {
    std::vector<Eigen::Index> rows;
    rows.reserve(lw.index.size());
    for (std::size_t r = 0; r < lw.index.size(); ++r) {
      const Eigen::Index i = lw.index[r];
      bool ok = true;
      for (const Eigen::Index c : cols)
        if (!std::isfinite(d.covariates(i, c))) { ok = false; break; }
      if (ok) rows.push_back(static_cast<Eigen::Index>(r));
    }
    return rows;
  };

  // Drop covariates with zero variance inside the window: they carry no
  // information and would only trip the rank check.
  std::vector<Eigen::Index> used_cols;
  for (std::size_t c = 0; c < cov_cols.size(); ++c) {
    double mn = std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    Eigen::Index finite = 0;
    for (const Eigen::Index i : lw.index) {
      const double v = d.covariates(i, cov_cols[c]);
      if (!std::isfinite(v)) continue;
      ++finite;
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    if (finite == 0 || mn == mx) {
      out.dropped.push_back(spec.covariates[c]);
    } else {
      used_cols.push_back(cov_cols[c]);
      out.used.push_back(spec.covariates[c]);
    }
  }

  const std::vector<Eigen::Index> rows = complete_rows(used_cols);
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const int base = pooled_base_cols(degree);
  const int k = base + static_cast<int>(used_cols.size());
  if (n < k)
    throw ValidationError("insufficient complete-case data in window: " +
                          std::to_string(n) + " rows for " + std::to_string(k) +
                          " design columns");

  Eigen::MatrixXd X(n, k);
  Eigen::VectorXd y(n), w(n);
  std::vector<Eigen::Index> data_rows(static_cast<std::size_t>(n));
  for (Eigen::Index rr = 0; rr < n; ++rr) {
    const Eigen::Index r = rows[static_cast<std::size_t>(rr)];
    const Eigen::Index i = lw.index[static_cast<std::size_t>(r)];
    const double xi = d.x[i];
    const double t = xi >= 0.0 ? 1.0 : 0.0;
    X(rr, 0) = t;
    X(rr, 1) = 1.0;
    double pw = 1.0;
    for (int j = 1; j <= degree; ++j) {
      pw *= xi;
      X(rr, 1 + j) = pw;
      X(rr, 1 + degree + j) = t * pw;
    }
    for (std::size_t c = 0; c < used_cols.size(); ++c)
      X(rr, base + static_cast<int>(c)) = d.covariates(i, used_cols[c]);
    y[rr] = d.outcome[i];
    w[rr] = lw.w[r];
    data_rows[static_cast<std::size_t>(rr)] = i;
    if (xi >= 0.0)
      ++out.n_right;
    else
      ++out.n_left;
  }
  if (out.n_left < degree + 2 || out.n_right < degree + 2)
    throw ValidationError("insufficient complete-case data on one side of the cutoff");

  try {
    out.fit = wls_fit(X, y, w, data_rows);
  } catch (const NumericalError& err) {
    // Map a rank failure in the covariate block back to the covariate name.
    const std::string what = err.what();
    const auto pos = what.find("column ");
    if (pos != std::string::npos) {
      const int col = std::atoi(what.c_str() + pos + 7);
      if (col >= base && col - base < static_cast<int>(out.used.size()))
        throw NumericalError("collinear covariate '" +
                             out.used[static_cast<std::size_t>(col - base)] +
                             "' inside the estimation window");
    }
    throw;
  }

  for (const auto& name : out.dropped)
    out.fit.warnings.push_back("covariate '" + name +
                               "' has zero variance inside the window; dropped");
  warn_if_ill_conditioned(out.fit);
  return out;
}

} // namespace rdd
