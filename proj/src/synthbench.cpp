#include "nmfuse/synthbench.hpp"

#include "nmfuse/errors.hpp"
#include "nmfuse/evaluation.hpp"
#include "nmfuse/numerics.hpp"
#include "nmfuse/rng.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace nmfuse {
namespace {

Eigen::MatrixXd cholesky_of(const NmScenario& scn) {
  if (scn.correlation.size() == 0) return Eigen::MatrixXd::Identity(scn.m(), scn.m());
  Eigen::LLT<Eigen::MatrixXd> llt(scn.correlation);
  if (llt.info() != Eigen::Success) throw ConfigError("scenario '" + scn.name + "': correlation is not positive definite");
  return llt.matrixL();
}

Eigen::MatrixXd draw_rows(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol, Eigen::Index n, RngStream rng) {
  Eigen::MatrixXd out(n, mean.size());
  for (Eigen::Index r = 0; r < n; ++r) out.row(r) = sample_gaussian_vector(mean, chol, rng).transpose();
  return out;
}

Eigen::VectorXd row_statistics(const CombinerSpec& spec, const Eigen::MatrixXd& z) {
  CombinerInput in;
  in.z = z;
  return combine(spec, in);
}

}  // namespace

bool NmScenario::satisfies_nm_constraint() const {
  return mu.size() > 0 && (mu.array() <= -epsilon).all();
}

void NmScenario::validate() const {
  const std::string who = "scenario '" + name + "': ";
  if (mu.size() < 1) throw ConfigError(who + "dimension must be >= 1");
  if (!mu.allFinite()) throw ConfigError(who + "mean has non-finite entries");
  if (n_h0 < 1 || n_h1 < 1) throw ConfigError(who + "sample counts must be >= 1");
  if (!std::isfinite(epsilon) || epsilon < 0.0) throw ConfigError(who + "epsilon must be >= 0");
  if (kind == ScenarioKind::dense && !satisfies_nm_constraint()) {
    throw ConfigError(who + "dense scenario needs every mean <= -epsilon");
  }
  if (correlation.size() != 0) {
    if (correlation.rows() != m() || correlation.cols() != m()) throw ConfigError(who + "correlation has wrong size");
    if (!correlation.allFinite() || (correlation - correlation.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
      throw ConfigError(who + "correlation must be finite and symmetric");
    }
    cholesky_of(*this);
  }
}

NmScenario dense_scenario(std::string name, Eigen::Index m, double shift, Eigen::Index n, std::uint64_t seed) {
  NmScenario s;
  s.name = std::move(name);
  s.kind = ScenarioKind::dense;
  s.mu = Eigen::VectorXd::Constant(m, shift);
  s.n_h0 = s.n_h1 = n;
  s.seed = seed;
  return s;
}

NmScenario sparse_scenario(std::string name, Eigen::Index m, Eigen::Index k, double shift, Eigen::Index n,
                           std::uint64_t seed) {
  if (k < 1 || k > m) throw ConfigError("sparse scenario needs 1 <= k <= m");
  NmScenario s;
  s.name = std::move(name);
  s.kind = ScenarioKind::sparse;
  s.mu = Eigen::VectorXd::Zero(m);
  s.mu.head(k).setConstant(shift);
  s.n_h0 = s.n_h1 = n;
  s.seed = seed;
  return s;
}

Eigen::MatrixXd ar1_correlation(Eigen::Index m, double rho) {
  Eigen::MatrixXd c(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) c(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  }
  return c;
}

std::vector<NmScenario> default_scenarios(Eigen::Index n, std::uint64_t seed) {
  std::vector<NmScenario> out;
  out.push_back(dense_scenario("dense-m12", 12, -0.5, n, seed));
  out.push_back(sparse_scenario("sparse-k1-m12", 12, 1, -3.0, n, seed + 1));
  out.push_back(sparse_scenario("sparse-k3-m12", 12, 3, -3.0, n, seed + 2));
  auto correlated = dense_scenario("dense-ar1-m12", 12, -0.5, n, seed + 3);
  correlated.correlation = ar1_correlation(12, 0.5);
  out.push_back(std::move(correlated));
  out.push_back(dense_scenario("dense-m24", 24, -0.5, n, seed + 4));
  return out;
}

NmSample generate(const NmScenario& scn) {
  scn.validate();
  const Eigen::MatrixXd chol = cholesky_of(scn);
  NmSample s;
  s.h0 = draw_rows(Eigen::VectorXd::Zero(scn.m()), chol, scn.n_h0, RngStream(scn.seed, 0));
  s.h1 = draw_rows(scn.mu, chol, scn.n_h1, RngStream(scn.seed, 1));
  return s;
}

std::vector<PowerRow> power_sweep(const std::vector<NmScenario>& scenarios, const std::vector<NamedCombiner>& combiners,
                                  const PowerSweepOptions& options) {
  std::vector<PowerRow> rows;
  if (combiners.empty()) return rows;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const auto& scn = scenarios[s];
    const NmSample sample = generate(scn);
    for (std::size_t c = 0; c < combiners.size(); ++c) {
      CombinerSpec spec = combiners[c].spec;
      if (spec.rule == Rule::glrt_cov && spec.sigma.size() == 0) {
        spec.sigma = scn.correlation.size() == 0 ? Eigen::MatrixXd::Identity(scn.m(), scn.m()) : scn.correlation;
      }
      const LabeledStatistics stats{row_statistics(spec, sample.h0), row_statistics(spec, sample.h1)};
      PowerRow row;
      row.scenario = scn.name;
      row.combiner = combiners[c].label;
      row.auroc = auroc(stats);
      row.far_alpha = options.far_alpha;
      row.dr = dr_at_far(stats, options.far_alpha).dr;
      if (options.bootstrap_resamples > 0) {
        RngStream rng(scn.seed, 1000 + c);
        const Eigen::Index n0 = stats.inlier.size();
        const Eigen::Index n1 = stats.ood.size();
        LabeledStatistics boot{Eigen::VectorXd(n0), Eigen::VectorXd(n1)};
        double sum = 0.0;
        double sum_sq = 0.0;
        for (int b = 0; b < options.bootstrap_resamples; ++b) {
          for (Eigen::Index i = 0; i < n0; ++i) boot.inlier[i] = stats.inlier[static_cast<Eigen::Index>(rng.next_u64() % n0)];
          for (Eigen::Index i = 0; i < n1; ++i) boot.ood[i] = stats.ood[static_cast<Eigen::Index>(rng.next_u64() % n1)];
          const double a = auroc(boot);
          sum += a;
          sum_sq += a * a;
        }
        const double k = options.bootstrap_resamples;
        row.auroc_se = std::sqrt(std::max(0.0, (sum_sq - sum * sum / k) / std::max(1.0, k - 1.0)));
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<EpsilonPoint> epsilon_sweep(const NmScenario& scn, const std::vector<double>& epsilons) {
  const NmSample sample = generate(scn);
  std::vector<EpsilonPoint> out;
  for (const double eps : epsilons) {
    CombinerSpec spec;
    spec.rule = Rule::glrt;
    spec.epsilon = eps;
    out.push_back({eps, auroc({row_statistics(spec, sample.h0), row_statistics(spec, sample.h1)})});
  }
  return out;
}

std::vector<double> realized_far_trials(Eigen::Index v, double a, int trials, std::uint64_t seed, FarMeasurement how) {
  if (v < 1) throw ConfigError("validation size must be >= 1");
  if (!(a > 0.0 && a < 1.0)) throw ConfigError("threshold a must lie in (0, 1)");
  const Eigen::Index l = beta_far_law(v, a).alpha_shape;
  std::vector<double> fars(static_cast<std::size_t>(std::max(trials, 0)), 0.0);
  if (l == 0) return fars;
  std::vector<double> bank_values(static_cast<std::size_t>(v));
  for (int t = 0; t < trials; ++t) {
    RngStream rng(seed, static_cast<std::uint64_t>(t));
    for (auto& x : bank_values) x = rng.normal();
    if (how.fresh_draws == 0) {
      // "conformal_p <= a" rejects exactly the statistics below the l-th
      // smallest bank value.
      std::nth_element(bank_values.begin(), bank_values.begin() + (l - 1), bank_values.end());
      fars[t] = std_normal_cdf(bank_values[l - 1]);
    } else {
      ConformalCalibration cal{ValidationBank(bank_values), Threshold{a, l, 0.0, false}, GuaranteeConfig{}};
      Eigen::Index rejected = 0;
      for (Eigen::Index i = 0; i < how.fresh_draws; ++i) rejected += detect(rng.normal(), cal) == Decision::ood;
      fars[t] = static_cast<double>(rejected) / static_cast<double>(how.fresh_draws);
    }
  }
  return fars;
}

GuaranteeTrialResult guarantee_trial(Eigen::Index v, const GuaranteeConfig& g, int trials, std::uint64_t seed,
                                     FarMeasurement how) {
  if (trials < 100) throw ConfigError("guarantee_trial needs at least 100 trials");
  GuaranteeTrialResult result;
  result.threshold = find_threshold(v, g);
  if (result.threshold.degenerate) {
    result.fars.assign(static_cast<std::size_t>(trials), 0.0);
    return result;
  }
  result.fars = realized_far_trials(v, result.threshold.a, trials, seed, how);
  std::size_t violations = 0;
  double total = 0.0;
  for (const double far : result.fars) {
    violations += far > g.alpha;
    total += far;
  }
  result.violation_rate = static_cast<double>(violations) / trials;
  result.mean_far = total / trials;
  return result;
}

}  // namespace nmfuse
