#pragma once

#include <Eigen/Dense>

namespace mvsens::lp {

/// maximize objective'x  s.t.  A_ub x <= b_ub,  A_eq x == b_eq,  x >= 0.
struct LinearProgram {
  Eigen::VectorXd objective;
  Eigen::MatrixXd A_ub;
  Eigen::VectorXd b_ub;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
};

enum class Status { optimal, infeasible, unbounded, iteration_limit };

struct Solution {
  Status status = Status::infeasible;
  double objective = 0.0;
  Eigen::VectorXd x;
  int iterations = 0;
};

struct Options {
  int max_iterations = 100000;
  double tolerance = 1e-10;
  /// Consecutive degenerate pivots before switching to Bland's rule.
  int degenerate_switch = 50;
};

/// Two-phase dense tableau simplex (Dantzig pricing, Bland's rule on stalls).
Solution solve(const LinearProgram& problem, const Options& options = {});

}  // namespace mvsens::lp
