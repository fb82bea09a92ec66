#pragma once

#include "mvsens/dataset.hpp"
#include "mvsens/rng.hpp"
#include "mvsens/sensitivity.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace mvsens::verify {

/// Solver under test: extrema of one arm from (outcomes, logits, params).
using ArmSolver = std::function<ArmExtrema(const Eigen::VectorXd&, const Eigen::VectorXd&, const SensitivityParams&)>;

/// The production cut-sweep solver.
ArmSolver threshold_solver();

/// Exhaustive search over the 2^n vertices of [1/Lambda, Lambda]^n (n <= 20).
ArmExtrema brute_force_extrema(const Eigen::VectorXd& outcomes, const Eigen::VectorXd& logits,
                               const SensitivityParams& params);

/// Random arm: outcomes are continuous, binary or heavily tied; logits ~ N(0, 1.5^2).
struct ArmInstance {
  Eigen::VectorXd outcomes;
  Eigen::VectorXd logits;
  SensitivityParams params;
};
ArmInstance random_arm(Index n, Rng& rng);

/// Random dataset with n units, J levels, d covariates and a softmax assignment
/// whose every level is present.
ObservationalDataset random_dataset(Index n, int J, int d, Rng& rng);

struct VerifyOptions {
  std::uint64_t seed = 20240601;
  int brute_instances = 100;
  int max_brute_n = 12;
  int lp_instances = 1000;
  int max_lp_n = 200;
  int collapse_datasets = 50;
  int nesting_datasets = 20;
};

struct CheckResult {
  std::string name;
  int passed = 0;
  int total = 0;
  std::vector<std::string> counterexamples;  ///< first few failures

  bool ok() const noexcept { return passed == total; }
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool ok() const noexcept;
};

/// Runs the oracle-equivalence and invariant suite against `solver`.
VerifyReport run_verification(const VerifyOptions& options = {}, const ArmSolver& solver = threshold_solver());

/// "name: passed/total pass|FAIL" per check, followed by counterexamples.
void print_report(const VerifyReport& report, std::ostream& os);

}  // namespace mvsens::verify
