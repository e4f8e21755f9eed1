#pragma once

#include "rdd/dataset.hpp"
#include "rdd/local_fit.hpp"

namespace rdd {

struct InferenceConfig {
  double level = 0.95; // confidence level, 0 < level < 1
  double rho = 1.0;    // h/b; only consulted when the spec leaves b unset
};

/// End-to-end single-cutoff estimation at a fixed bandwidth:
///   tau      from degree-p fits at h,
///   tau_bc   from degree-(p+1) fits at the same h (b = h construction),
///   robust SE from the degree-(p+1) sandwich (spec.vce, HC3 by default),
///   CI       tau_bc +/- z * SE, p-value from the normal reference,
///   pct_effect = 100 tau / |mu_minus| with mu_minus the left degree-p
///   intercept of the unadjusted fit.
/// With b > h the two-fit construction below is used instead (canonical
/// specs only).
RdEstimate estimate_rd(const Dataset& d, const FitSpec& spec,
                       const InferenceConfig& cfg = {});

/// Textbook bias-correction cross-check: tau_p(h) minus the plug-in bias
/// assembled from the degree-(p+1) fits at b, with the robust variance of
/// the combined linear-in-y weights. Coincides with estimate_rd to machine
/// precision when b = h. Canonical (covariate-free) specs only; requires
/// b >= h.
RdEstimate estimate_rd_twofit(const Dataset& d, const FitSpec& spec,
                              const InferenceConfig& cfg = {});

/// Runs estimate_rd with the named pre-intervention covariate as the
/// outcome; the covariate list of `spec` is used minus the tested column.
/// When spec.h is unset, a bandwidth is selected on the covariate-as-outcome
/// data first.
RdEstimate falsification_estimate(const Dataset& d,
                                  const std::string& covariate, FitSpec spec,
                                  const InferenceConfig& cfg = {});

} // namespace rdd
