#pragma once

#include "mvsens/dataset.hpp"
#include "mvsens/gps.hpp"
#include "mvsens/sensitivity.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace mvsens {

/// Partially identified interval of tau(c) = sum_a c_a m(a) at one lambda.
struct ContrastResult {
  ContrastVector contrast;
  double lambda = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double point_estimate = 0.0;  ///< value at lambda = 0
};

/**
 * Interval arithmetic over the per-arm ranges: the h_a vary independently
 * across arms, so
 *   lo = sum_{c_a>0} c_a m_min(a) + sum_{c_a<0} c_a m_max(a)
 * and symmetrically for hi.
 */
ContrastResult contrast_interval(std::span<const ArmExtrema> extrema, const ContrastVector& c);

/// Memoizes per-arm extrema by (dataset fingerprint, GPS fingerprint, lambda).
class ExtremaCache {
 public:
  std::shared_ptr<const std::vector<ArmExtrema>> get(const ObservationalDataset& data, const GpsMatrix& gps,
                                                     const SensitivityParams& params);
  std::size_t size() const;
  std::size_t computations() const;

 private:
  using Key = std::tuple<std::uint64_t, std::uint64_t, double>;
  mutable std::mutex mutex_;
  std::map<Key, std::shared_ptr<const std::vector<ArmExtrema>>> entries_;
  std::size_t computations_ = 0;
};

std::uint64_t fingerprint(const GpsMatrix& gps);

/// Intervals for every contrast and lambda, ordered by contrast then lambda
/// (lambdas ascending). Arm extrema are computed once per lambda.
std::vector<ContrastResult> contrast_table(const ObservationalDataset& data, const GpsMatrix& gps,
                                           std::span<const ContrastVector> contrasts, std::vector<double> lambdas,
                                           ExtremaCache* cache = nullptr);

/// contrast_table over all J(J-1)/2 pairwise ATEs.
std::vector<ContrastResult> pairwise_ate_table(const ObservationalDataset& data, const GpsMatrix& gps,
                                               std::vector<double> lambdas, ExtremaCache* cache = nullptr);

}  // namespace mvsens
