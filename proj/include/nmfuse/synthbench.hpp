#pragma once

// Synthetic negative-means benchmarks: z-values drawn as N(0, C) for inliers
// and N(mu, C) for novelties, plus Monte Carlo harnesses for combiner power
// and for the conformal false-alarm guarantee.

#include "nmfuse/combiner.hpp"
#include "nmfuse/conformal.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace nmfuse {

enum class ScenarioKind {
  // every mu_l <= -epsilon
  dense,
  // k of m means shifted, the rest 0
  sparse,
  // mu = 0: novelties are indistinguishable from inliers
  null,
};

struct NmScenario {
  std::string name;
  ScenarioKind kind = ScenarioKind::dense;
  Eigen::VectorXd mu;
  // Empty means identity.
  Eigen::MatrixXd correlation;
  double epsilon = 0.25;
  Eigen::Index n_h0 = 10000;
  Eigen::Index n_h1 = 10000;
  std::uint64_t seed = 0;

  Eigen::Index m() const noexcept { return mu.size(); }
  // True when mu satisfies the negative-means constraint mu_l <= -epsilon.
  bool satisfies_nm_constraint() const;
  // Throws ConfigError: bad sizes, non-SPD correlation, or a dense scenario
  // that violates the negative-means constraint.
  void validate() const;
};

NmScenario dense_scenario(std::string name, Eigen::Index m, double shift, Eigen::Index n, std::uint64_t seed);
NmScenario sparse_scenario(std::string name, Eigen::Index m, Eigen::Index k, double shift, Eigen::Index n,
                           std::uint64_t seed);
// Unit-variance AR(1) correlation rho^|i-j|.
Eigen::MatrixXd ar1_correlation(Eigen::Index m, double rho);

// Suite used by the `simulate` command when no config is given: dense,
// sparse k in {1, 3}, and AR(1)-correlated dense at m = 12, plus dense at
// m = 24.
std::vector<NmScenario> default_scenarios(Eigen::Index n, std::uint64_t seed);

struct NmSample {
  Eigen::MatrixXd h0;
  Eigen::MatrixXd h1;
};

// Deterministic in the scenario seed. Inliers use stream 0, novelties stream 1.
NmSample generate(const NmScenario& scn);

struct NamedCombiner {
  std::string label;
  CombinerSpec spec;
};

struct PowerRow {
  std::string scenario;
  std::string combiner;
  double auroc = 0.0;
  // Bootstrap standard error of the AUROC (0 when resamples == 0).
  double auroc_se = 0.0;
  double far_alpha = 0.0;
  double dr = 0.0;
};

struct PowerSweepOptions {
  double far_alpha = 0.05;
  int bootstrap_resamples = 200;
};

/// Every combiner is evaluated on the same draws of each scenario.
/// glrt-cov combiners with an empty sigma use the scenario correlation.
std::vector<PowerRow> power_sweep(const std::vector<NmScenario>& scenarios, const std::vector<NamedCombiner>& combiners,
                                  const PowerSweepOptions& options = {});

struct EpsilonPoint {
  double epsilon;
  double auroc;
};

// GLRT AUROC over an epsilon grid on one scenario's draws.
std::vector<EpsilonPoint> epsilon_sweep(const NmScenario& scn, const std::vector<double>& epsilons);

// How the realized false-alarm rate of a calibrated detector is measured.
struct FarMeasurement {
  // 0: exact, Phi evaluated at the bank order statistic that bounds the
  // rejection region (the inlier statistic is standard normal).
  // > 0: fraction of that many fresh inlier draws the detector rejects.
  Eigen::Index fresh_draws = 0;
};

/// Realized false-alarm rates of "conformal_p <= a" over independent trials,
/// each with a fresh standard-normal validation bank of size v.
/// Trial i uses RngStream(seed, i).
std::vector<double> realized_far_trials(Eigen::Index v, double a, int trials, std::uint64_t seed,
                                        FarMeasurement how = {});

struct GuaranteeTrialResult {
  Threshold threshold;
  double violation_rate = 0.0;
  double mean_far = 0.0;
  std::vector<double> fars;
};

/// Calibrates with find_threshold(v, g) and reports how often the realized
/// FAR exceeds alpha. Throws ConfigError if trials < 100.
GuaranteeTrialResult guarantee_trial(Eigen::Index v, const GuaranteeConfig& g, int trials, std::uint64_t seed,
                                     FarMeasurement how = {});

}  // namespace nmfuse
