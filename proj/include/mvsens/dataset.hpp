#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mvsens {

using Index = Eigen::Index;

/// One observed unit. Levels are 1-based; covariates exclude the intercept.
struct Unit {
  int treatment = 1;
  Eigen::VectorXd covariates;
  double outcome = 0.0;
};

/**
 * Immutable columnar store of n units (treatment, covariates, outcome) for a
 * study with J >= 2 treatment levels.
 *
 * Construction validates every invariant: labels within 1..J, finite
 * covariates and outcomes, consistent dimensions, and every level present.
 */
class ObservationalDataset {
 public:
  ObservationalDataset(Eigen::VectorXi treatment, Eigen::MatrixXd covariates,
                       Eigen::VectorXd outcome, int num_levels,
                       std::vector<std::string> covariate_names = {},
                       std::vector<std::string> level_labels = {});

  Index size() const noexcept { return treatment_.size(); }
  int num_levels() const noexcept { return num_levels_; }
  Index num_covariates() const noexcept { return covariates_.cols(); }

  const Eigen::VectorXi& treatment() const noexcept { return treatment_; }
  const Eigen::MatrixXd& covariates() const noexcept { return covariates_; }
  const Eigen::VectorXd& outcome() const noexcept { return outcome_; }
  const std::vector<std::string>& covariate_names() const noexcept { return covariate_names_; }
  const std::vector<std::string>& level_labels() const noexcept { return level_labels_; }

  Unit unit(Index i) const;

  /// Units per level; element a-1 counts level a.
  std::vector<Index> level_counts() const;

  /// Row indices of units with the given level, in dataset order.
  std::vector<Index> arm_indices(int level) const;

  /// Dataset formed from the given rows (repeats allowed). Throws
  /// EmptyTreatmentLevel when a level is not represented.
  ObservationalDataset select_rows(std::span<const Index> rows) const;

  /// Content hash over values, names and labels (FNV-1a over the raw bytes).
  std::uint64_t fingerprint() const;

 private:
  Eigen::VectorXi treatment_;
  Eigen::MatrixXd covariates_;
  Eigen::VectorXd outcome_;
  int num_levels_;
  std::vector<std::string> covariate_names_;
  std::vector<std::string> level_labels_;
};

/// Contrast coefficients c over the J average potential outcomes.
class ContrastVector {
 public:
  explicit ContrastVector(Eigen::VectorXd coefficients, std::string label = {});

  const Eigen::VectorXd& coefficients() const noexcept { return c_; }
  Index size() const noexcept { return c_.size(); }
  double operator[](Index a) const { return c_[a]; }

  /// Display name; "tau_{k,l}" for pairwise contrasts, else "c=(...)".
  const std::string& label() const noexcept { return label_; }

  ContrastVector scaled(double alpha) const;

 private:
  Eigen::VectorXd c_;
  std::string label_;
};

/// Contrast m(k) - m(l); requires 1 <= k < l <= J.
ContrastVector pairwise_contrast(int k, int l, int num_levels);

/// All J(J-1)/2 pairwise contrasts ordered (1,2), (1,3), ..., (J-1,J).
std::vector<ContrastVector> all_pairwise_contrasts(int num_levels);

}  // namespace mvsens
