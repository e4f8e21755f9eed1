#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <vector>

namespace rdd {

enum class KernelKind { triangular, uniform, epanechnikov };

KernelKind kernel_from_string(std::string_view name);
std::string to_string(KernelKind kind);

// Kernel evaluation. All kernels are symmetric, nonnegative and vanish
// outside [-1, 1].
//   triangular:    max(0, 1 - |u|)
//   uniform:       1/2 on |u| <= 1
//   epanechnikov:  3/4 (1 - u^2) on |u| <= 1
double kernel_value(KernelKind kind, double u) noexcept;

enum class Side { left, right, both };

// Rows with strictly positive kernel weight K(x/h), restricted to a side of
// the cutoff. The treated side is x >= 0.
struct LocalWeights {
  std::vector<Eigen::Index> index; // dataset rows with positive weight
  Eigen::VectorXd w;               // weights aligned with `index`
  Eigen::Index n_left = 0;         // positive-weight rows with x < 0
  Eigen::Index n_right = 0;        // positive-weight rows with x >= 0
};

/// Kernel weights K(x_i/h) for rows on the requested side with |x_i| <= h.
/// Throws ValidationError when a requested side has no positive weight.
LocalWeights localized_weights(const Eigen::VectorXd& x, KernelKind kind,
                               double h, Side side);

// Boundary moment matrices of a kernel on [0, 1] with the polynomial basis
// r(u) = (1, u, ..., u^p):
//   gamma = int r r' K,   theta = int r u^{p+1} K,   psi = int r r' K^2
// together with the plug-in constants
//   bias_const = e0' gamma^{-1} theta
//   var_const  = e0' gamma^{-1} psi gamma^{-1} e0.
// Entries come from a fixed-resolution composite Simpson rule rather than
// hardcoded decimals; the uniform kernel has exact rational entries the test
// suite checks against.
struct KernelMoments {
  Eigen::MatrixXd gamma;
  Eigen::VectorXd theta;
  Eigen::MatrixXd psi;
  double bias_const = 0.0;
  double var_const = 0.0;
};

KernelMoments boundary_moments(KernelKind kind, int p);

} // namespace rdd
