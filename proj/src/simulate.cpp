#include "rdd/simulate.hpp"

#include "rdd/bandwidth.hpp"
#include "rdd/errors.hpp"
#include "rdd/heterogeneity.hpp"
#include "rdd/inference.hpp"
#include "rdd/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>
#include <vector>

namespace rdd {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  constexpr double two_pi = 6.283185307179586476925286766559;
  spare_ = radius * std::sin(two_pi * u2);
  has_spare_ = true;
  return radius * std::cos(two_pi * u2);
}

namespace {

enum StudyId : std::uint64_t {
  kCoverage = 1,
  kEfficiency = 2,
  kEqualitySize = 3,
  kEqualityPower = 4,
};

// Parallel map over replications; each worker owns a contiguous chunk and
// every replication reseeds from (seed, study, rep).
void parallel_reps(int reps, int threads,
                   const std::function<void(int)>& body) {
  int hw = threads > 0 ? threads
                       : static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 1 || reps < 8) {
    for (int r = 0; r < reps; ++r) body(r);
    return;
  }
  hw = std::min(hw, reps);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(hw));
  std::atomic<int> next{0};
  for (int t = 0; t < hw; ++t) {
    pool.emplace_back([&]() {
      while (true) {
        const int r = next.fetch_add(1);
        if (r >= reps) break;
        body(r);
      }
    });
  }
  for (auto& th : pool) th.join();
}

// Smooth coverage DGP: side-wise quadratics with distinct curvature, jump
// tau at the cutoff, mildly heteroskedastic noise.
constexpr double kCoverageTau = 0.4;

Dataset coverage_draw(Rng& rng, int n) {
  Dataset d;
  d.cutoff = 0.0;
  d.x.resize(n);
  d.outcome.resize(n);
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    const double mean = x < 0.0 ? 1.0 + 0.5 * x + 0.8 * x * x
                                : 1.0 + kCoverageTau + 0.5 * x - 0.6 * x * x;
    const double sd = 0.5 * (1.0 + 0.5 * std::abs(x));
    d.x[i] = x;
    d.outcome[i] = mean + sd * rng.normal();
  }
  d.score = d.x;
  d.covariates.resize(n, 0);
  return d;
}

// Efficiency DGP: two covariates explaining most of the outcome noise
// (R^2 about 0.6 within any window), continuous at the cutoff.
Dataset efficiency_draw(Rng& rng, int n) {
  Dataset d;
  d.cutoff = 0.0;
  d.x.resize(n);
  d.outcome.resize(n);
  d.covariate_names = {"z1", "z2"};
  d.covariates.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const double mean = x < 0.0 ? 1.0 + 0.5 * x + 0.8 * x * x
                                : 1.0 + kCoverageTau + 0.5 * x - 0.6 * x * x;
    d.x[i] = x;
    d.covariates(i, 0) = z1;
    d.covariates(i, 1) = z2;
    d.outcome[i] = mean + 1.0 * z1 + 0.8 * z2 + rng.normal();
  }
  d.score = d.x;
  return d;
}

// Equality-test DGP: one balanced binary group, group-1 jump shifted by
// `gap`. Each subgroup is its own smooth design.
Dataset equality_draw(Rng& rng, int n_per_group, double gap) {
  const int n = 2 * n_per_group;
  Dataset d;
  d.cutoff = 0.0;
  d.x.resize(n);
  d.outcome.resize(n);
  d.covariates.resize(n, 0);
  d.group.resize(n);
  d.group_name = "g";
  for (int i = 0; i < n; ++i) {
    const double g = i < n_per_group ? 0.0 : 1.0;
    const double x = rng.uniform(-1.0, 1.0);
    const double tau = kCoverageTau + (g > 0.5 ? gap : 0.0);
    const double mean = x < 0.0 ? 1.0 + 0.5 * x + 0.8 * x * x
                                : 1.0 + tau + 0.5 * x - 0.6 * x * x;
    d.x[i] = x;
    d.group[i] = g;
    d.outcome[i] = mean + 0.7 * rng.normal();
  }
  d.score = d.x;
  return d;
}

FitSpec base_spec() {
  FitSpec spec;
  spec.p = 1;
  spec.kernel = KernelKind::triangular;
  spec.vce = HcFlavor::hc3;
  return spec;
}

struct EqualityOutcome {
  double reject_rate = 0.0;
  double median_se_diff = 0.0;
};

EqualityOutcome equality_study(std::uint64_t seed, StudyId study, int reps,
                               int n_per_group, double gap, int threads) {
  std::vector<int> rejected(static_cast<std::size_t>(reps), 0);
  std::vector<double> se_diff(static_cast<std::size_t>(reps), 0.0);
  parallel_reps(reps, threads, [&](int r) {
    Rng rng(seed, study, static_cast<std::uint64_t>(r));
    const Dataset d = equality_draw(rng, n_per_group, gap);
    HteOptions options;
    options.mode = BandwidthMode::separate;
    const HteResult res = estimate_hte(d, "g", base_spec(), {}, options);
    rejected[static_cast<std::size_t>(r)] = res.equality_p < 0.05 ? 1 : 0;
    se_diff[static_cast<std::size_t>(r)] =
        std::sqrt(res.joint_cov(0, 0) + res.joint_cov(1, 1));
  });
  EqualityOutcome out;
  out.reject_rate =
      100.0 * std::accumulate(rejected.begin(), rejected.end(), 0) / reps;
  std::nth_element(se_diff.begin(), se_diff.begin() + reps / 2, se_diff.end());
  out.median_se_diff = se_diff[static_cast<std::size_t>(reps / 2)];
  return out;
}

} // namespace

SimulateReport run_simulations(const SimulateConfig& config) {
  SimulateReport report;
  report.config = config;
  report.true_tau = kCoverageTau;

  if (config.run_coverage) {
    const int reps = config.reps_coverage;
    std::vector<int> covered(static_cast<std::size_t>(reps), 0);
    parallel_reps(reps, config.threads, [&](int r) {
      Rng rng(config.seed, kCoverage, static_cast<std::uint64_t>(r));
      const Dataset d = coverage_draw(rng, config.n);
      FitSpec spec = base_spec();
      spec.h = select_bandwidth(d, spec).h_mse;
      const RdEstimate est = estimate_rd(d, spec);
      covered[static_cast<std::size_t>(r)] =
          est.ci_lo <= kCoverageTau && kCoverageTau <= est.ci_hi ? 1 : 0;
    });
    report.coverage_pct =
        100.0 * std::accumulate(covered.begin(), covered.end(), 0) / reps;
  }

  if (config.run_efficiency) {
    const int reps = config.reps_efficiency;
    std::vector<int> shorter(static_cast<std::size_t>(reps), 0);
    std::vector<int> close(static_cast<std::size_t>(reps), 0);
    std::vector<double> len_can(static_cast<std::size_t>(reps), 0.0);
    std::vector<double> len_adj(static_cast<std::size_t>(reps), 0.0);
    parallel_reps(reps, config.threads, [&](int r) {
      Rng rng(config.seed, kEfficiency, static_cast<std::uint64_t>(r));
      const Dataset d = efficiency_draw(rng, config.n);

      FitSpec canonical = base_spec();
      canonical.h = select_bandwidth(d, canonical).h_mse;
      const RdEstimate est_can = estimate_rd(d, canonical);

      FitSpec adjusted = base_spec();
      adjusted.covariates = {"z1", "z2"};
      adjusted.h = select_bandwidth(d, adjusted).h_mse;
      const RdEstimate est_adj = estimate_rd(d, adjusted);

      shorter[static_cast<std::size_t>(r)] =
          est_adj.ci_length() < est_can.ci_length() ? 1 : 0;
      close[static_cast<std::size_t>(r)] =
          std::abs(est_adj.tau - est_can.tau) < est_can.se_robust ? 1 : 0;
      len_can[static_cast<std::size_t>(r)] = est_can.ci_length();
      len_adj[static_cast<std::size_t>(r)] = est_adj.ci_length();
    });
    report.ci_shorter_pct =
        100.0 * std::accumulate(shorter.begin(), shorter.end(), 0) / reps;
    report.tau_within_1se_pct =
        100.0 * std::accumulate(close.begin(), close.end(), 0) / reps;
    report.mean_len_canonical =
        std::accumulate(len_can.begin(), len_can.end(), 0.0) / reps;
    report.mean_len_adjusted =
        std::accumulate(len_adj.begin(), len_adj.end(), 0.0) / reps;
  }

  if (config.run_equality) {
    const int n_per_group = config.n / 2;
    const EqualityOutcome size =
        equality_study(config.seed, kEqualitySize, config.reps_equality_size,
                       n_per_group, 0.0, config.threads);
    report.equality_size_pct = size.reject_rate;
    // Power at a gap of three typical standard errors of the difference.
    report.equality_gap = 3.0 * size.median_se_diff;
    const EqualityOutcome power =
        equality_study(config.seed, kEqualityPower, config.reps_equality_power,
                       n_per_group, report.equality_gap, config.threads);
    report.equality_power_pct = power.reject_rate;
  }

  return report;
}

std::string SimulateReport::to_text() const {
  std::ostringstream out;
  out << "monte carlo report (seed " << config.seed << ", n " << config.n
      << ")\n";
  if (config.run_coverage)
    out << "  coverage: robust 95% CI covered true tau in "
        << format_sig(coverage_pct) << "% of " << config.reps_coverage
        << " replications\n";
  if (config.run_efficiency) {
    out << "  efficiency: covariate adjustment shortened the CI in "
        << format_sig(ci_shorter_pct) << "% of " << config.reps_efficiency
        << " replications\n";
    out << "  efficiency: |tau_adj - tau_can| < 1 canonical SE in "
        << format_sig(tau_within_1se_pct) << "%\n";
    out << "  efficiency: mean CI length " << format_sig(mean_len_canonical)
        << " (canonical) vs " << format_sig(mean_len_adjusted)
        << " (adjusted)\n";
  }
  if (config.run_equality) {
    out << "  equality test: size " << format_sig(equality_size_pct)
        << "% at nominal 5% (" << config.reps_equality_size
        << " replications)\n";
    out << "  equality test: power " << format_sig(equality_power_pct)
        << "% at gap " << format_sig(equality_gap) << " ("
        << config.reps_equality_power << " replications)\n";
  }
  return out.str();
}

nlohmann::json SimulateReport::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["seed"] = config.seed;
  j["n"] = config.n;
  if (config.run_coverage) {
    j["coverage"] = {{"reps", config.reps_coverage},
                     {"true_tau", true_tau},
                     {"coverage_pct", coverage_pct}};
  }
  if (config.run_efficiency) {
    j["efficiency"] = {{"reps", config.reps_efficiency},
                       {"ci_shorter_pct", ci_shorter_pct},
                       {"tau_within_1se_pct", tau_within_1se_pct},
                       {"mean_len_canonical", mean_len_canonical},
                       {"mean_len_adjusted", mean_len_adjusted}};
  }
  if (config.run_equality) {
    j["equality"] = {{"reps_size", config.reps_equality_size},
                     {"reps_power", config.reps_equality_power},
                     {"size_pct", equality_size_pct},
                     {"power_pct", equality_power_pct},
                     {"gap", equality_gap}};
  }
  return j;
}

} // namespace rdd
