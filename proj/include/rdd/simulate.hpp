#pragma once

#include "rdd/dataset.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <random>
#include <string>

namespace rdd {

// Deterministic replication RNG: mt19937_64 with explicit uniform and
// Box-Muller normal draws, so reports are byte-identical across platforms
// regardless of the standard library's distribution internals.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t study, std::uint64_t rep) {
    std::seed_seq seq{seed, study, rep};
    engine_.seed(seq);
  }

  double uniform() { // [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal();

  std::uint64_t bits() { return engine_(); }

private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct SimulateConfig {
  std::uint64_t seed = 1;
  int n = 2000;
  int reps_coverage = 2000;
  int reps_efficiency = 500;
  int reps_equality_size = 1000;
  int reps_equality_power = 500;
  bool run_coverage = true;
  bool run_efficiency = true;
  bool run_equality = true;
  int threads = 0; // 0 = hardware concurrency
};

struct SimulateReport {
  SimulateConfig config;

  // coverage study
  double coverage_pct = 0.0;
  double true_tau = 0.0;

  // efficiency study
  double ci_shorter_pct = 0.0;
  double tau_within_1se_pct = 0.0;
  double mean_len_canonical = 0.0;
  double mean_len_adjusted = 0.0;

  // equality study
  double equality_size_pct = 0.0;
  double equality_power_pct = 0.0;
  double equality_gap = 0.0; // injected effect gap (3 x typical se of diff)

  std::string to_text() const;
  nlohmann::json to_json() const;
};

/// Seeded, deterministic Monte Carlo checks of the inference pipeline:
/// robust CI coverage on a smooth DGP, CI shortening under informative
/// covariates, and size/power of the group-effect equality test.
/// Replications are parallelized; each is seeded by (seed, study, index) so
/// the aggregate does not depend on the thread count.
SimulateReport run_simulations(const SimulateConfig& config);

} // namespace rdd
