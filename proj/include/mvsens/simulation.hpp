#pragma once

#include "mvsens/bootstrap.hpp"
#include "mvsens/dataset.hpp"
#include "mvsens/estimands.hpp"
#include "mvsens/gps.hpp"
#include "mvsens/rng.hpp"
#include "mvsens/sensitivity.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mvsens::sim {

enum class Scenario { I, II, custom };

std::string_view to_string(Scenario s) noexcept;
Scenario parse_scenario(std::string_view name);

/**
 * Three-level design with covariates (1, X1, X2, X3):
 *   X1 ~ Bernoulli(0.5), X2 ~ U(-1, 1), X3 ~ N(0, x3_sd^2),
 *   r_a(X) = softmax_a(X' beta_a), P(Y(a) = 1 | X) = softmax_a(X' delta_a),
 * with one potential outcome equal to 1 per unit (multinomial draw) and
 * Y = Y(A). Scenario I uses (k2, k3) = (0.1, -0.1), scenario II (3, 3).
 */
struct ScenarioConfig {
  Scenario scenario = Scenario::I;
  Index n = 750;
  double k2 = 0.1;
  double k3 = -0.1;
  double x3_sd = 0.5;
  Eigen::Matrix<double, 3, 4> beta;   // row a-1 = beta_a
  Eigen::Matrix<double, 3, 4> delta;  // row a-1 = delta_a
  std::uint64_t seed = 0;

  static ScenarioConfig make(Scenario s, Index n = 750, std::uint64_t seed = 0);
  /// Same design with explicit overlap knobs.
  static ScenarioConfig custom(double k2, double k3, Index n = 750, std::uint64_t seed = 0);

  void validate() const;
};

/// True GPS probabilities and logits (n x 3) at the given covariates (no intercept column).
GpsMatrix true_gps(const ScenarioConfig& config, const Eigen::MatrixXd& covariates);

/// Outcome probabilities P(Y(a) = 1 | X), n x 3.
Eigen::MatrixXd outcome_probs(const ScenarioConfig& config, const Eigen::MatrixXd& covariates);

Eigen::MatrixXd draw_covariates(const ScenarioConfig& config, Index n, Rng& rng);

ObservationalDataset generate_dataset(const ScenarioConfig& config, Rng& rng);
/// Uses stream (config.seed, simulation_data, 0).
ObservationalDataset generate_dataset(const ScenarioConfig& config);

/// Large draw from the design with true logits, for interval ground truth.
class PopulationOracle {
 public:
  PopulationOracle(const ScenarioConfig& config, Index N, std::uint64_t seed);

  Index size() const noexcept { return n_; }
  ContrastResult interval(const ContrastVector& c, const SensitivityParams& params) const;
  std::vector<ArmExtrema> extrema(const SensitivityParams& params) const;

 private:
  Index n_;
  std::vector<ArmSweep> arms_;
};

struct OracleInterval {
  double lo = 0.0;
  double hi = 0.0;
  double lo_doubled = 0.0;  ///< from 2N units (the N units plus N more)
  double hi_doubled = 0.0;
  Index N = 0;
  bool stable = false;  ///< both endpoints moved by < 0.005 when N doubled
};

/// Partially identified interval of tau(c) from N >= 1e5 draws with the true logits.
OracleInterval true_interval_oracle(const ScenarioConfig& config, const ContrastVector& c,
                                    const SensitivityParams& params, Index N = 1'000'000);

struct StudyConfig {
  ScenarioConfig scenario;
  std::vector<double> lambdas{0.0, 0.1, 0.2, 0.5, 1.0, 2.0};
  int R = 300;
  int B = 500;
  double alpha = 0.10;
  Index oracle_N = 1'000'000;
  unsigned threads = 1;
  FitConfig fit;
  std::function<void(int done, int total)> progress;
};

/// One row of the study table (one estimand at one lambda).
struct EstimandMetrics {
  std::string estimand;
  double lambda = 0.0;
  double Lambda = 1.0;
  double pct_bias_lo = 0.0;  ///< 100 * mean(lo - true_lo) / sd(lo)
  double pct_bias_hi = 0.0;
  double noncoverage = 0.0;  ///< share of CIs not containing the whole true interval
  double true_lo = 0.0;
  double true_hi = 0.0;
  double median_point_lo = 0.0;
  double median_point_hi = 0.0;
  double median_ci_lo = 0.0;
  double median_ci_hi = 0.0;
  int replications = 0;
};

struct StudyMetrics {
  std::vector<EstimandMetrics> rows;  ///< ordered by estimand then lambda
  int R = 0;
  int failed_replications = 0;
  std::vector<std::string> failures;
  double oracle_max_shift = 0.0;  ///< largest endpoint change when the oracle N doubles
  long bootstrap_redraws = 0;

  const EstimandMetrics& row(const std::string& estimand, double lambda) const;
};

/**
 * Monte Carlo study: replication r draws data from stream
 * (seed, simulation_data, r), fits a multinomial-logit GPS and runs a
 * percentile bootstrap seeded by derive_seed(seed, simulation_bootstrap, r).
 * Replications whose GPS fit fails are excluded and counted.
 */
StudyMetrics run_study(const StudyConfig& config);

/// CSV with one row per (estimand, lambda).
std::string study_csv(const StudyMetrics& metrics);

}  // namespace mvsens::sim
