#include "rdd/kernels.hpp"

#include "rdd/errors.hpp"

#include <cmath>

namespace rdd {

KernelKind kernel_from_string(std::string_view name) {
  if (name == "triangular") return KernelKind::triangular;
  if (name == "uniform") return KernelKind::uniform;
  if (name == "epanechnikov") return KernelKind::epanechnikov;
  throw ValidationError("unknown kernel '" + std::string(name) +
                        "' (expected triangular, uniform or epanechnikov)");
}

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::triangular: return "triangular";
    case KernelKind::uniform: return "uniform";
    case KernelKind::epanechnikov: return "epanechnikov";
  }
  return "?";
}

double kernel_value(KernelKind kind, double u) noexcept {
  const double a = std::abs(u);
  switch (kind) {
    case KernelKind::triangular: return a < 1.0 ? 1.0 - a : 0.0;
    case KernelKind::uniform: return a <= 1.0 ? 0.5 : 0.0;
    case KernelKind::epanechnikov:
      return a <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
  }
  return 0.0;
}

LocalWeights localized_weights(const Eigen::VectorXd& x, KernelKind kind,
                               double h, Side side) {
  if (!(h > 0.0)) throw ValidationError("bandwidth must be positive");

  LocalWeights out;
  out.index.reserve(static_cast<std::size_t>(x.size()));
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(x.size()));

  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (!std::isfinite(xi)) continue;
    const bool on_right = xi >= 0.0;
    if (side == Side::left && on_right) continue;
    if (side == Side::right && !on_right) continue;
    const double wi = kernel_value(kind, xi / h);
    if (wi <= 0.0) continue;
    out.index.push_back(i);
    w.push_back(wi);
    if (on_right)
      ++out.n_right;
    else
      ++out.n_left;
  }

  if ((side == Side::left || side == Side::both) && out.n_left == 0)
    throw ValidationError(
        "no positive-weight observations left of the cutoff at h = " +
        std::to_string(h) + " (bandwidth too small)");
  if ((side == Side::right || side == Side::both) && out.n_right == 0)
    throw ValidationError(
        "no positive-weight observations at/right of the cutoff at h = " +
        std::to_string(h) + " (bandwidth too small)");

  out.w = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  return out;
}

namespace {

// Composite Simpson rule on [0, 1]. The integrands are low-degree
// polynomials times the kernel, so this fixed resolution is accurate far
// beyond the 1e-10 the tests demand.
constexpr int kQuadIntervals = 4096; // even

template <typename F>
double simpson01(const F& f) {
  const double step = 1.0 / kQuadIntervals;
  double sum = f(0.0) + f(1.0);
  for (int i = 1; i < kQuadIntervals; ++i)
    sum += f(i * step) * (i % 2 == 1 ? 4.0 : 2.0);
  return sum * step / 3.0;
}

} // namespace

KernelMoments boundary_moments(KernelKind kind, int p) {
  if (p < 0) throw ValidationError("polynomial degree must be nonnegative");
  const int dim = p + 1;

  KernelMoments m;
  m.gamma.resize(dim, dim);
  m.theta.resize(dim);
  m.psi.resize(dim, dim);

  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      const int pw = i + j;
      m.gamma(i, j) = m.gamma(j, i) =
          simpson01([&](double u) { return std::pow(u, pw) * kernel_value(kind, u); });
      m.psi(i, j) = m.psi(j, i) = simpson01([&](double u) {
        const double k = kernel_value(kind, u);
        return std::pow(u, pw) * k * k;
      });
    }
    m.theta[i] = simpson01([&](double u) {
      return std::pow(u, i + p + 1) * kernel_value(kind, u);
    });
  }

  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(dim);
  e0[0] = 1.0;
  const Eigen::LDLT<Eigen::MatrixXd> gamma_ldlt(m.gamma);
  const Eigen::VectorXd ginv_e0 = gamma_ldlt.solve(e0);
  m.bias_const = ginv_e0.dot(m.theta);
  m.var_const = ginv_e0.dot(m.psi * ginv_e0);
  return m;
}

} // namespace rdd
