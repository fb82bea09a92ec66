#pragma once

#include "mvsens/dataset.hpp"
#include "mvsens/error.hpp"
#include "mvsens/gps.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace mvsens {

/// Sensitivity level: lambda = log(Lambda) >= 0 bounds |h_a| <= lambda.
struct SensitivityParams {
  double lambda = 0.0;
  double Lambda = 1.0;

  static SensitivityParams from_lambda(double lambda);
  static SensitivityParams from_Lambda(double Lambda);
};

enum class Direction { min, max, both };

/// Lower and upper clamp applied to exp(-g) before weighting.
inline constexpr double kMinInverseOdds = 1e-12;
inline constexpr double kMaxInverseOdds = 1e12;

/**
 * Range of the shifted SIPW estimate of m(a) over all z in [1/Lambda, Lambda]^n_a.
 * `point` is the plain SIPW estimate (z = 1). Assignments are in arm order.
 */
struct ArmExtrema {
  int arm = 0;
  double lambda = 0.0;
  double m_min = 0.0;
  double m_max = 0.0;
  double point = 0.0;
  Eigen::VectorXd argmin_z;
  Eigen::VectorXd argmax_z;
};

/**
 * Shifted SIPW estimate
 *
 *   sum_i y_i (1 + z_i exp(-g_i)) / sum_i (1 + z_i exp(-g_i))
 *
 * over the units of one arm, with g_i the fitted GPS logit of that arm and
 * z_i = exp(h_a(X_i, Y_i)). exp(-g) is clamped to [1e-12, 1e12].
 */
template <typename DerivedY, typename DerivedG, typename DerivedZ>
typename DerivedY::Scalar sipw_estimate(const Eigen::DenseBase<DerivedY>& outcomes,
                                        const Eigen::DenseBase<DerivedG>& logits,
                                        const Eigen::DenseBase<DerivedZ>& z);

/// exp(-g) clamped to [kMinInverseOdds, kMaxInverseOdds]; warns when clamping.
Eigen::VectorXd inverse_odds(const Eigen::Ref<const Eigen::VectorXd>& logits);

/// Shifted GPS r^(h) = 1 / (1 + z exp(-g)), elementwise.
Eigen::VectorXd shifted_gps(const Eigen::Ref<const Eigen::VectorXd>& z,
                            const Eigen::Ref<const Eigen::VectorXd>& logits);

/**
 * Exact extrema of the shifted SIPW estimate for one arm by a cut sweep.
 *
 * An optimal vertex of the box puts z = Lambda on every unit whose outcome
 * lies above a cut and 1/Lambda below it (reversed for the minimum). Units
 * are sorted once by outcome (stable, so ties keep arm order); each solve()
 * evaluates all n_a + 1 cuts with prefix sums in O(n_a).
 */
class ArmSweep {
 public:
  ArmSweep(const Eigen::Ref<const Eigen::VectorXd>& outcomes, const Eigen::Ref<const Eigen::VectorXd>& logits,
           int arm = 0);

  Index size() const noexcept { return static_cast<Index>(order_.size()); }
  double point() const noexcept { return point_; }

  ArmExtrema solve(const SensitivityParams& params, Direction direction = Direction::both,
                   bool with_assignments = true) const;

 private:
  int arm_;
  std::vector<Index> order_;
  // Prefix sums over sorted units: entry k covers the first k units.
  std::vector<long double> pre_y_, pre_b_, pre_yb_;
  long double total_y_ = 0, total_b_ = 0, total_yb_ = 0;
  double point_ = 0.0;
};

ArmExtrema arm_extrema_threshold(const Eigen::Ref<const Eigen::VectorXd>& outcomes,
                                 const Eigen::Ref<const Eigen::VectorXd>& logits, const SensitivityParams& params,
                                 Direction direction = Direction::both, int arm = 0);

/**
 * Same optimum via the Charnes-Cooper transformation t = 1 / sum(1 + z e^-g),
 * w = t z, solved as a linear program with the dense simplex in lp.hpp.
 * Throws LpInfeasible if the solver does not report an optimum.
 */
ArmExtrema arm_extrema_lp(const Eigen::Ref<const Eigen::VectorXd>& outcomes,
                          const Eigen::Ref<const Eigen::VectorXd>& logits, const SensitivityParams& params,
                          int arm = 0);

/// Outcomes and GPS logits of level `arm` (1-based), in dataset order.
struct ArmData {
  Eigen::VectorXd outcomes;
  Eigen::VectorXd logits;
};
ArmData arm_data(const ObservationalDataset& data, const GpsMatrix& gps, int arm);

/// Per-arm extrema (length J) via the cut sweep.
std::vector<ArmExtrema> all_arm_extrema(const ObservationalDataset& data, const GpsMatrix& gps,
                                        const SensitivityParams& params, bool with_assignments = true);

/// Extrema for every lambda in the grid, sorting each arm once.
/// Result[k] holds the J arms for params[k].
std::vector<std::vector<ArmExtrema>> all_arm_extrema(const ObservationalDataset& data, const GpsMatrix& gps,
                                                     std::span<const SensitivityParams> params,
                                                     bool with_assignments = false);

// ---------------------------------------------------------------------------

template <typename DerivedY, typename DerivedG, typename DerivedZ>
typename DerivedY::Scalar sipw_estimate(const Eigen::DenseBase<DerivedY>& outcomes,
                                        const Eigen::DenseBase<DerivedG>& logits,
                                        const Eigen::DenseBase<DerivedZ>& z) {
  using Scalar = typename DerivedY::Scalar;
  const Index n = outcomes.size();
  if (n == 0) fail(ErrorCode::EmptyArm, "sipw_estimate on an empty arm");
  if (logits.size() != n || z.size() != n) fail(ErrorCode::LengthMismatch, "sipw_estimate inputs differ in length");
  Scalar num = 0;
  Scalar den = 0;
  for (Index i = 0; i < n; ++i) {
    using std::exp;
    Scalar b = exp(-Scalar(logits.derived().coeff(i)));
    b = std::min(std::max(b, Scalar(kMinInverseOdds)), Scalar(kMaxInverseOdds));
    const Scalar w = Scalar(1) + Scalar(z.derived().coeff(i)) * b;
    num += Scalar(outcomes.derived().coeff(i)) * w;
    den += w;
  }
  return num / den;
}

}  // namespace mvsens
