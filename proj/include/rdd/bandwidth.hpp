#pragma once

#include "rdd/dataset.hpp"
#include "rdd/local_fit.hpp"

namespace rdd {

struct PilotSummary {
  double sigma2_left = 0.0;  // residual variance, x < 0
  double sigma2_right = 0.0; // residual variance, x >= 0
  double deriv_left = 0.0;   // estimated (p+1)-th derivative at the cutoff
  double deriv_right = 0.0;
  double density_at_cutoff = 0.0;
};

struct BandwidthReport {
  double h_mse = 0.0;
  PilotSummary pilot;
  double bias_const = 0.0; // e0' gamma^{-1} theta
  double var_const = 0.0;  // e0' gamma^{-1} psi gamma^{-1} e0
  bool regularization_active = false;
  double bias_estimate = 0.0; // B_hat
  double bias_se = 0.0;       // se(B_hat) from the pilot coefficient variance
  std::vector<std::string> warnings;
};

/// Plug-in MSE-optimal bandwidth
///   h = [ V / (2 (p+1) (B^2 + lambda) n) ]^{1/(2p+3)}
/// with B and V built from boundary kernel moments and side-wise global
/// polynomial pilots of degree p+3; lambda = (3 se(B))^2 guards against
/// near-zero curvature (flagged when lambda exceeds B^2). When the spec
/// carries covariates, the pilot regressions include them with a common
/// coefficient so the bandwidth responds to the adjustment.
BandwidthReport select_bandwidth(const Dataset& d, const FitSpec& spec);

/// Percent change in robust CI length relative to the canonical estimate:
/// 100 (len(adjusted) / len(canonical) - 1).
double ci_length_change_pct(const RdEstimate& canonical,
                            const RdEstimate& adjusted);

} // namespace rdd
