#pragma once

#include "rdd/bandwidth.hpp"
#include "rdd/dataset.hpp"
#include "rdd/inference.hpp"

#include <map>

namespace rdd {

enum class BandwidthMode { separate, common };

struct GroupEstimate {
  double level = 0.0;
  RdEstimate est;
  bool bandwidth_selected = false; // false when the bandwidth was supplied
  BandwidthReport bw;              // meaningful when bandwidth_selected
};

struct HteResult {
  std::vector<GroupEstimate> per_group; // ascending group level
  Eigen::MatrixXd joint_cov; // robust covariance of the bias-corrected
                             // group effects; diagonal for disjoint subsamples
  double equality_stat = 0.0;
  int equality_df = 0;
  double equality_p = 1.0;
  BandwidthMode bandwidth_mode = BandwidthMode::separate;
  std::vector<std::string> warnings;

  const GroupEstimate* find(double level) const;
};

struct HteOptions {
  BandwidthMode mode = BandwidthMode::separate;
  std::map<double, double> fixed_h; // per-level bandwidth (separate mode)
  double common_h = 0.0;            // fixed common bandwidth; 0 = select
};

/// Conditional RD effects by a discrete group column. Separate mode selects
/// (or takes) one bandwidth per group on its own subsample; common mode uses
/// a single bandwidth selected on the full sample. Covariates in `spec`
/// enter each group's regression with the restricted common coefficient.
HteResult estimate_hte(const Dataset& d, const std::string& group_col,
                       const FitSpec& spec, const InferenceConfig& cfg = {},
                       const HteOptions& options = {});

/// estimate_hte with an explicit covariate set; validates that the set
/// excludes the group column and its source column.
HteResult estimate_hte_with_covariates(const Dataset& d,
                                       const std::string& group_col,
                                       const std::vector<std::string>& covariates,
                                       FitSpec spec,
                                       const InferenceConfig& cfg = {},
                                       const HteOptions& options = {});

/// Wald test that all bias-corrected group effects are equal; for two groups
/// the statistic is (tau1 - tau0)^2 / (V1 + V0).
WaldResult test_effect_equality(const HteResult& result);

// Pooled regression with every regressor interacted with the group
// indicators, at one common bandwidth. Group-specific T coefficients sit at
// block offsets group_index * pooled_base_cols(degree); they must match the
// subgroup fits when the bandwidths coincide.
LocalFit interacted_joint_fit(const Dataset& d, const std::string& group_col,
                              const FitSpec& spec, int degree);

// Experimental: continuous-moderator analysis via a degree-0 interaction of
// the treatment indicator with the moderator centered at its kernel-weighted
// window mean. Reports the effect at the mean moderator value and the
// interaction slope.
struct ContinuousHteResult {
  double tau_at_mean = 0.0;
  double interaction = 0.0;
  double interaction_se = 0.0;
  double interaction_p = 1.0;
  double moderator_mean = 0.0;
};

ContinuousHteResult estimate_hte_continuous(const Dataset& d,
                                            const std::string& covariate,
                                            const FitSpec& spec);

} // namespace rdd
