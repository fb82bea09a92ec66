#include "mvsens/sensitivity.hpp"

#include "mvsens/error.hpp"
#include "mvsens/log.hpp"
#include "mvsens/lp.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

namespace mvsens {

using Eigen::MatrixXd;
using Eigen::VectorXd;

SensitivityParams SensitivityParams::from_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    fail(ErrorCode::InvalidArgument, "sensitivity parameter lambda must be finite and >= 0, got " +
                                         std::to_string(lambda));
  }
  return SensitivityParams{lambda, std::exp(lambda)};
}

SensitivityParams SensitivityParams::from_Lambda(double Lambda) {
  if (!(Lambda >= 1.0) || !std::isfinite(Lambda)) {
    fail(ErrorCode::InvalidArgument, "sensitivity parameter Lambda must be finite and >= 1, got " +
                                         std::to_string(Lambda));
  }
  return SensitivityParams{std::log(Lambda), Lambda};
}

VectorXd inverse_odds(const Eigen::Ref<const VectorXd>& logits) {
  VectorXd b = (-logits.array()).exp().matrix();
  Index clamped = 0;
  for (Index i = 0; i < b.size(); ++i) {
    if (!(b[i] >= kMinInverseOdds)) {
      b[i] = kMinInverseOdds;
      ++clamped;
    } else if (b[i] > kMaxInverseOdds) {
      b[i] = kMaxInverseOdds;
      ++clamped;
    }
  }
  if (clamped > 0) {
    warn("exp(-logit) clamped to [1e-12, 1e12] for " + std::to_string(clamped) +
         " unit(s); fitted GPS values are extreme (overlap failure?)");
  }
  return b;
}

VectorXd shifted_gps(const Eigen::Ref<const VectorXd>& z, const Eigen::Ref<const VectorXd>& logits) {
  if (z.size() != logits.size()) fail(ErrorCode::LengthMismatch, "shifted_gps inputs differ in length");
  return (1.0 + z.array() * inverse_odds(logits).array()).inverse().matrix();
}

ArmSweep::ArmSweep(const Eigen::Ref<const VectorXd>& outcomes, const Eigen::Ref<const VectorXd>& logits, int arm)
    : arm_(arm) {
  const Index n = outcomes.size();
  if (n == 0) fail(ErrorCode::EmptyArm, "arm " + std::to_string(arm) + " has no units");
  if (logits.size() != n) fail(ErrorCode::LengthMismatch, "outcomes and logits differ in length");
  const VectorXd b = inverse_odds(logits);

  order_.resize(n);
  std::iota(order_.begin(), order_.end(), Index{0});
  std::stable_sort(order_.begin(), order_.end(), [&](Index i, Index j) { return outcomes[i] < outcomes[j]; });

  pre_y_.assign(n + 1, 0.0L);
  pre_b_.assign(n + 1, 0.0L);
  pre_yb_.assign(n + 1, 0.0L);
  for (Index k = 0; k < n; ++k) {
    const Index i = order_[k];
    const long double y = outcomes[i];
    const long double bi = b[i];
    pre_y_[k + 1] = pre_y_[k] + y;
    pre_b_[k + 1] = pre_b_[k] + bi;
    pre_yb_[k + 1] = pre_yb_[k] + y * bi;
  }
  total_y_ = pre_y_[n];
  total_b_ = pre_b_[n];
  total_yb_ = pre_yb_[n];
  point_ = static_cast<double>((total_y_ + total_yb_) / (static_cast<long double>(n) + total_b_));
}

ArmExtrema ArmSweep::solve(const SensitivityParams& params, Direction direction, bool with_assignments) const {
  const Index n = size();
  const long double hi = params.Lambda;
  const long double lo = 1.0L / hi;
  const long double count = static_cast<long double>(n);

  // Units [0, k) of the sorted order get weight `below`, the rest `above`.
  auto value_at = [&](Index k, long double below, long double above) {
    const long double num = total_y_ + below * pre_yb_[k] + above * (total_yb_ - pre_yb_[k]);
    const long double den = count + below * pre_b_[k] + above * (total_b_ - pre_b_[k]);
    return num / den;
  };

  ArmExtrema out;
  out.arm = arm_;
  out.lambda = params.lambda;
  out.point = point_;
  out.m_min = std::numeric_limits<double>::quiet_NaN();
  out.m_max = std::numeric_limits<double>::quiet_NaN();

  auto assignment = [&](Index cut, double below, double above) {
    VectorXd z(n);
    for (Index k = 0; k < n; ++k) z[order_[k]] = k < cut ? below : above;
    return z;
  };

  if (direction != Direction::min) {
    Index best_k = 0;
    long double best = value_at(0, lo, hi);
    for (Index k = 1; k <= n; ++k) {
      const long double v = value_at(k, lo, hi);
      if (v > best) {
        best = v;
        best_k = k;
      }
    }
    out.m_max = static_cast<double>(best);
    if (with_assignments) out.argmax_z = assignment(best_k, static_cast<double>(lo), static_cast<double>(hi));
  }
  if (direction != Direction::max) {
    Index best_k = 0;
    long double best = value_at(0, hi, lo);
    for (Index k = 1; k <= n; ++k) {
      const long double v = value_at(k, hi, lo);
      if (v < best) {
        best = v;
        best_k = k;
      }
    }
    out.m_min = static_cast<double>(best);
    if (with_assignments) out.argmin_z = assignment(best_k, static_cast<double>(hi), static_cast<double>(lo));
  }
  return out;
}

ArmExtrema arm_extrema_threshold(const Eigen::Ref<const VectorXd>& outcomes, const Eigen::Ref<const VectorXd>& logits,
                                 const SensitivityParams& params, Direction direction, int arm) {
  return ArmSweep(outcomes, logits, arm).solve(params, direction, true);
}

ArmExtrema arm_extrema_lp(const Eigen::Ref<const VectorXd>& outcomes, const Eigen::Ref<const VectorXd>& logits,
                          const SensitivityParams& params, int arm) {
  const Index n = outcomes.size();
  if (n == 0) fail(ErrorCode::EmptyArm, "arm " + std::to_string(arm) + " has no units");
  if (logits.size() != n) fail(ErrorCode::LengthMismatch, "outcomes and logits differ in length");
  const VectorXd b = inverse_odds(logits);
  const double L = params.Lambda;
  const double inv_L = 1.0 / L;
  const double width = L - inv_L;

  // Variables x = (t, s_1..s_n) with w_i = t/Lambda + s_i, so the box
  // t/Lambda <= w_i <= t*Lambda becomes 0 <= s_i <= (Lambda - 1/Lambda) t.
  lp::LinearProgram prog;
  prog.A_ub = MatrixXd::Zero(n, n + 1);
  prog.A_ub.col(0).setConstant(-width);
  prog.A_ub.rightCols(n).diagonal().setOnes();
  prog.b_ub = VectorXd::Zero(n);
  prog.A_eq.resize(1, n + 1);
  prog.A_eq(0, 0) = (1.0 + inv_L * b.array()).sum();
  prog.A_eq.row(0).tail(n) = b.transpose();
  prog.b_eq = VectorXd::Ones(1);

  VectorXd numerator(n + 1);
  numerator[0] = (outcomes.array() * (1.0 + inv_L * b.array())).sum();
  numerator.tail(n) = outcomes.cwiseProduct(b);

  auto run = [&](double sign, double& value, VectorXd& z) {
    prog.objective = sign * numerator;
    const lp::Solution sol = lp::solve(prog);
    if (sol.status != lp::Status::optimal) {
      fail(ErrorCode::LpInfeasible, "Charnes-Cooper program for arm " + std::to_string(arm) +
                                        " did not reach an optimum (status " +
                                        std::to_string(static_cast<int>(sol.status)) + ")");
    }
    const double t = sol.x[0];
    if (!(t > 0.0)) fail(ErrorCode::LpInfeasible, "Charnes-Cooper scale variable t is not positive");
    value = sign * sol.objective;
    z = (inv_L + sol.x.tail(n).array() / t).min(L).max(inv_L).matrix();
  };

  ArmExtrema out;
  out.arm = arm;
  out.lambda = params.lambda;
  out.point = sipw_estimate(outcomes, logits, VectorXd::Ones(n));
  run(1.0, out.m_max, out.argmax_z);
  run(-1.0, out.m_min, out.argmin_z);
  return out;
}

ArmData arm_data(const ObservationalDataset& data, const GpsMatrix& gps, int arm) {
  if (gps.logits.rows() != data.size() || gps.logits.cols() != data.num_levels()) {
    fail(ErrorCode::DimensionMismatch, "GPS matrix does not match the dataset");
  }
  const auto rows = data.arm_indices(arm);
  if (rows.empty()) fail(ErrorCode::EmptyArm, "arm " + std::to_string(arm) + " has no units");
  ArmData out{VectorXd(static_cast<Index>(rows.size())), VectorXd(static_cast<Index>(rows.size()))};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.outcomes[k] = data.outcome()[rows[k]];
    out.logits[k] = gps.logits(rows[k], arm - 1);
  }
  return out;
}

std::vector<ArmExtrema> all_arm_extrema(const ObservationalDataset& data, const GpsMatrix& gps,
                                        const SensitivityParams& params, bool with_assignments) {
  std::vector<ArmExtrema> out;
  for (int a = 1; a <= data.num_levels(); ++a) {
    const ArmData arm = arm_data(data, gps, a);
    out.push_back(ArmSweep(arm.outcomes, arm.logits, a).solve(params, Direction::both, with_assignments));
  }
  return out;
}

std::vector<std::vector<ArmExtrema>> all_arm_extrema(const ObservationalDataset& data, const GpsMatrix& gps,
                                                     std::span<const SensitivityParams> params,
                                                     bool with_assignments) {
  std::vector<std::vector<ArmExtrema>> out(params.size());
  for (int a = 1; a <= data.num_levels(); ++a) {
    const ArmData arm = arm_data(data, gps, a);
    const ArmSweep sweep(arm.outcomes, arm.logits, a);
    for (std::size_t k = 0; k < params.size(); ++k) {
      out[k].push_back(sweep.solve(params[k], Direction::both, with_assignments));
    }
  }
  return out;
}

}  // namespace mvsens
