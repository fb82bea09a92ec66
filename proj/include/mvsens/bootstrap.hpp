#pragma once

#include "mvsens/dataset.hpp"
#include "mvsens/gps.hpp"
#include "mvsens/sensitivity.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mvsens {

struct GpsModelSpec {
  GpsModelType type = GpsModelType::multinomial_logit;
  FitConfig fit;
};

struct BootstrapConfig {
  int B = 1000;
  double alpha = 0.10;
  std::uint64_t seed = 0;
  /// false: reuse the full-data GPS for resampled units. Fast, but the
  /// resulting intervals ignore GPS estimation error (exploratory only).
  bool refit_gps = true;
  int max_redraws = 100;
  unsigned threads = 1;
};

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double alpha = 0.10;
  int B_effective = 0;
};

struct BootstrapDiagnostics {
  int B = 0;
  int B_effective = 0;
  long redraws = 0;       ///< resamples missing a level
  long fit_failures = 0;  ///< resamples whose GPS refit failed (also redrawn)
  std::uint64_t seed = 0;
  std::string rng_family;
  bool refit_gps = true;
};

/// Linear interpolation between order statistics at 0-based position (len-1)*q.
double quantile(std::span<const double> values, double q);

/**
 * Per-replicate arm extrema for a grid of lambdas.
 *
 * Replicate b draws n units with replacement from its own stream
 * make_stream(seed, bootstrap, b); resamples missing a level (or whose GPS
 * refit fails) are redrawn from the same stream. Results do not depend on
 * the thread count.
 */
class BootstrapReplicates {
 public:
  static BootstrapReplicates run(const ObservationalDataset& data, const GpsModelSpec& spec,
                                 std::vector<double> lambdas, const BootstrapConfig& config,
                                 const GpsModel* full_model = nullptr);

  const std::vector<double>& lambdas() const noexcept { return lambdas_; }
  const BootstrapDiagnostics& diagnostics() const noexcept { return diagnostics_; }
  int replicates() const noexcept { return diagnostics_.B_effective; }

  /// (L*_b, U*_b) for every replicate, in replicate order.
  std::vector<std::pair<double, double>> replicate_bounds(const ContrastVector& c, double lambda) const;

  /// [Q_{alpha/2}(L*), Q_{1-alpha/2}(U*)].
  ConfidenceInterval ci(const ContrastVector& c, double lambda, double alpha) const;

 private:
  std::size_t lambda_index(double lambda) const;

  std::vector<double> lambdas_;
  int num_levels_ = 0;
  // [b][lambda][arm][min|max], flattened.
  std::vector<double> bounds_;
  BootstrapDiagnostics diagnostics_;
};

ConfidenceInterval percentile_bootstrap_ci(const ObservationalDataset& data, const GpsModelSpec& spec,
                                           const ContrastVector& c, const SensitivityParams& params,
                                           const BootstrapConfig& config);

}  // namespace mvsens
