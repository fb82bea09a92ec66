#pragma once

#include "mvsens/dataset.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mvsens {

/**
 * Newton-Raphson settings shared by the GPS fitters.
 *
 * The objective is the mean log-likelihood (divided by n) minus
 * ridge/2 times the squared slope coefficients on the standardized scale;
 * grad_tol applies to the max-norm of its gradient.
 */
struct FitConfig {
  int max_iter = 100;
  double grad_tol = 1e-8;
  double ridge = 0.0;
  bool standardize = true;
  /// Starting coefficients on the original covariate scale (same layout as
  /// the model's coef()). Zero when absent.
  std::optional<Eigen::MatrixXd> initial_coef;
};

struct FitDiagnostics {
  double loglik = 0.0;  ///< unpenalized log-likelihood (sum over units)
  int iterations = 0;
  double grad_norm = 0.0;
  int step_halvings = 0;
  bool ridge_fallback = false;
  std::vector<double> objective_trace;  ///< penalized mean objective per accepted iterate
};

/// Fitted r_a(X_i) and g_a(X_i) = logit(r_a(X_i)) for every unit and level.
struct GpsMatrix {
  Eigen::MatrixXd probs;   // n x J
  Eigen::MatrixXd logits;  // n x J
};

enum class GpsModelType { multinomial_logit, continuation_ratio };

std::string_view to_string(GpsModelType type) noexcept;
GpsModelType parse_gps_model_type(std::string_view name);

/**
 * Multinomial logit with level 1 as reference: row a-2 of coef holds
 * (intercept, slopes) for level a, a = 2..J.
 */
class MultinomialLogitModel {
 public:
  explicit MultinomialLogitModel(Eigen::MatrixXd coef, FitDiagnostics diagnostics = {},
                                 std::vector<std::string> levels = {},
                                 std::vector<std::string> covariate_names = {});

  int num_levels() const noexcept { return static_cast<int>(coef_.rows()) + 1; }
  Index num_covariates() const noexcept { return coef_.cols() - 1; }
  const Eigen::MatrixXd& coef() const noexcept { return coef_; }
  const FitDiagnostics& diagnostics() const noexcept { return diagnostics_; }
  const std::vector<std::string>& levels() const noexcept { return levels_; }
  const std::vector<std::string>& covariate_names() const noexcept { return covariate_names_; }

  /// n x J matrix of log r_a(x) for the rows of x (no intercept column).
  Eigen::MatrixXd log_probs(const Eigen::MatrixXd& x) const;

 private:
  Eigen::MatrixXd coef_;
  FitDiagnostics diagnostics_;
  std::vector<std::string> levels_;
  std::vector<std::string> covariate_names_;
};

/**
 * Forward continuation-ratio model with shared slopes:
 *   P(A = a | A >= a, x) = 1 / (1 + exp(-(thresholds[a-1] + x' slopes))), a < J.
 * Level probabilities follow by telescoping the continuation products.
 */
class ContinuationRatioModel {
 public:
  ContinuationRatioModel(Eigen::VectorXd thresholds, Eigen::VectorXd slopes,
                         FitDiagnostics diagnostics = {}, std::vector<std::string> levels = {},
                         std::vector<std::string> covariate_names = {});

  int num_levels() const noexcept { return static_cast<int>(thresholds_.size()) + 1; }
  Index num_covariates() const noexcept { return slopes_.size(); }
  const Eigen::VectorXd& thresholds() const noexcept { return thresholds_; }
  const Eigen::VectorXd& slopes() const noexcept { return slopes_; }
  const FitDiagnostics& diagnostics() const noexcept { return diagnostics_; }
  const std::vector<std::string>& levels() const noexcept { return levels_; }
  const std::vector<std::string>& covariate_names() const noexcept { return covariate_names_; }

  /// (J-1) x (d+1) matrix whose row a-1 is (thresholds[a-1], slopes').
  Eigen::MatrixXd coef() const;

  Eigen::MatrixXd log_probs(const Eigen::MatrixXd& x) const;

 private:
  Eigen::VectorXd thresholds_;
  Eigen::VectorXd slopes_;
  FitDiagnostics diagnostics_;
  std::vector<std::string> levels_;
  std::vector<std::string> covariate_names_;
};

using GpsModel = std::variant<MultinomialLogitModel, ContinuationRatioModel>;

MultinomialLogitModel fit_multinomial_logit(const ObservationalDataset& data, const FitConfig& config = {});
ContinuationRatioModel fit_continuation_ratio(const ObservationalDataset& data, const FitConfig& config = {});
GpsModel fit_gps(GpsModelType type, const ObservationalDataset& data, const FitConfig& config = {});

GpsModelType model_type(const GpsModel& model) noexcept;
const FitDiagnostics& diagnostics(const GpsModel& model) noexcept;
/// Layout used by FitConfig::initial_coef for warm starts.
Eigen::MatrixXd coefficients(const GpsModel& model);

/// Builds probabilities and logits from an n x J matrix of log-probabilities.
/// logits(i,a) = log p_a - log(sum_{b != a} p_b), evaluated in log space.
GpsMatrix gps_from_log_probs(const Eigen::MatrixXd& log_probs);

GpsMatrix predict_gps(const MultinomialLogitModel& model, const ObservationalDataset& data);
GpsMatrix predict_gps(const ContinuationRatioModel& model, const ObservationalDataset& data);
GpsMatrix predict_gps(const GpsModel& model, const ObservationalDataset& data);

/// JSON document {model_type, levels, covariate_names, coef_shape, coef
/// (row-major), fit_diagnostics{loglik, iterations, grad_norm}}.
std::string model_to_json(const GpsModel& model);
GpsModel model_from_json(const std::string& text);

}  // namespace mvsens
