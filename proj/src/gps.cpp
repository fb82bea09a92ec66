#include "mvsens/gps.hpp"

#include "mvsens/error.hpp"
#include "mvsens/log.hpp"

#include <json.hpp>

#include <cmath>
#include <functional>
#include <limits>

namespace mvsens {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

VectorXd rowwise_logsumexp(const MatrixXd& m) {
  const VectorXd mx = m.rowwise().maxCoeff();
  return mx.array() + (m.colwise() - mx).array().exp().rowwise().sum().log();
}

// Per-column affine map x = mean + scale * z. Binary columns are untouched.
struct Scaling {
  VectorXd mean;
  VectorXd scale;
};

Scaling column_scaling(const MatrixXd& x, bool standardize) {
  const Index d = x.cols();
  Scaling s{VectorXd::Zero(d), VectorXd::Ones(d)};
  if (!standardize || x.rows() < 2) return s;
  for (Index j = 0; j < d; ++j) {
    const auto col = x.col(j).array();
    if (((col == 0.0) || (col == 1.0)).all()) continue;
    const double mu = col.mean();
    const double sd = std::sqrt((col - mu).square().sum() / static_cast<double>(x.rows() - 1));
    s.mean[j] = mu;
    if (sd > 0.0) s.scale[j] = sd;
  }
  return s;
}

MatrixXd standardized(const MatrixXd& x, const Scaling& s) {
  return ((x.rowwise() - s.mean.transpose()).array().rowwise() / s.scale.transpose().array()).matrix();
}

struct Evaluation {
  double value = 0.0;  // mean log-likelihood
  VectorXd grad;
  MatrixXd hess;
  double min_log_prob = 0.0;
};

using Evaluator = std::function<Evaluation(const VectorXd&, bool)>;

constexpr double kSeparationLogProb = -23.025850929940457;  // log(1e-10)
constexpr double kFallbackRidge = 1e-6;
constexpr double kStepTol = 1e-4;

// Maximizes mean-loglik - ridge/2 |theta[mask]|^2 by damped Newton steps.
VectorXd newton_maximize(const Evaluator& evaluate, VectorXd theta, const VectorXd& ridge_mask,
                         const FitConfig& config, FitDiagnostics& diag, std::string_view what) {
  double fallback = 0.0;
  auto penalty = [&](const VectorXd& t) {
    return 0.5 * (config.ridge + fallback) * (ridge_mask.array() * t.array().square()).sum();
  };
  auto penalized = [&](Evaluation& e, const VectorXd& t) {
    e.value -= penalty(t);
    e.grad.array() -= (config.ridge + fallback) * ridge_mask.array() * t.array();
    e.hess.diagonal().array() -= (config.ridge + fallback) * ridge_mask.array();
  };
  auto check_separation = [&](const Evaluation& e) {
    if (config.ridge == 0.0 && e.min_log_prob < kSeparationLogProb) {
      fail(ErrorCode::SeparationDetected,
           std::string(what) + ": fitted probability below 1e-10 after " +
               std::to_string(diag.iterations) + " iterations; refit with a ridge penalty");
    }
  };

  Evaluation cur = evaluate(theta, true);
  penalized(cur, theta);
  check_separation(cur);
  diag.objective_trace.push_back(cur.value);

  const double eps = std::numeric_limits<double>::epsilon();
  for (;;) {
    const double gnorm = cur.grad.lpNorm<Eigen::Infinity>();
    MatrixXd info = -cur.hess;
    Eigen::LDLT<MatrixXd> ldlt(info);
    const VectorXd dvec = ldlt.vectorD();
    const double dmax = dvec.cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || dvec.minCoeff() <= 1e-12 * std::max(1.0, dmax)) {
      if (fallback == 0.0) {
        fallback = kFallbackRidge;
        diag.ridge_fallback = true;
        cur = evaluate(theta, true);
        penalized(cur, theta);
        continue;
      }
      if (ldlt.info() != Eigen::Success) {
        fail(ErrorCode::DidNotConverge, std::string(what) + ": Hessian factorization failed");
      }
    }
    const VectorXd step = ldlt.solve(cur.grad);
    if (gnorm <= config.grad_tol && step.lpNorm<Eigen::Infinity>() <= kStepTol) {
      // Final polishing step, kept only if it does not lower the objective.
      const VectorXd next = theta + step;
      Evaluation fin = evaluate(next, true);
      penalized(fin, next);
      if (std::isfinite(fin.value) && fin.value >= cur.value - 8.0 * eps * std::max(1.0, std::abs(cur.value)) &&
          fin.grad.lpNorm<Eigen::Infinity>() <= gnorm) {
        theta = next;
        cur = std::move(fin);
        diag.objective_trace.push_back(cur.value);
      }
      diag.grad_norm = cur.grad.lpNorm<Eigen::Infinity>();
      break;
    }
    if (diag.iterations >= config.max_iter) {
      fail(ErrorCode::DidNotConverge, std::string(what) + ": " + std::to_string(diag.iterations) +
                                          " iterations, gradient max-norm " + std::to_string(gnorm));
    }

    double t = 1.0;
    bool accepted = false;
    VectorXd next;
    Evaluation trial;
    for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
      next = theta + t * step;
      trial = evaluate(next, false);
      trial.value -= penalty(next);
      if (std::isfinite(trial.value) && trial.value >= cur.value - 8.0 * eps * std::max(1.0, std::abs(cur.value))) {
        accepted = true;
        break;
      }
      ++diag.step_halvings;
    }
    if (!accepted) {
      if (gnorm <= config.grad_tol) {
        diag.grad_norm = gnorm;
        break;
      }
      fail(ErrorCode::DidNotConverge, std::string(what) + ": line search failed after " +
                                          std::to_string(diag.iterations) + " iterations, gradient max-norm " +
                                          std::to_string(gnorm));
    }
    theta = next;
    ++diag.iterations;
    cur = evaluate(theta, true);
    penalized(cur, theta);
    diag.objective_trace.push_back(cur.value);
    check_separation(cur);
  }
  return theta;
}

void require_all_levels(const ObservationalDataset& data) {
  const auto counts = data.level_counts();
  for (std::size_t a = 0; a < counts.size(); ++a) {
    if (counts[a] == 0) fail(ErrorCode::EmptyTreatmentLevel, "level " + std::to_string(a + 1));
  }
}

MatrixXd mnl_log_probs_from_linear(const MatrixXd& eta_rest) {
  MatrixXd eta(eta_rest.rows(), eta_rest.cols() + 1);
  eta.col(0).setZero();
  eta.rightCols(eta_rest.cols()) = eta_rest;
  const VectorXd lse = rowwise_logsumexp(eta);
  return eta.colwise() - lse;
}

MatrixXd cr_log_probs_from_linear(const MatrixXd& eta) {
  // eta: n x (J-1) continuation linear predictors.
  const Index n = eta.rows();
  const Index jm1 = eta.cols();
  MatrixXd logp(n, jm1 + 1);
  for (Index i = 0; i < n; ++i) {
    double survive = 0.0;
    for (Index a = 0; a < jm1; ++a) {
      logp(i, a) = survive + log_sigmoid(eta(i, a));
      survive += log_sigmoid(-eta(i, a));
    }
    logp(i, jm1) = survive;
  }
  return logp;
}

void check_dimension(Index model_d, const ObservationalDataset& data) {
  if (model_d != data.num_covariates()) {
    fail(ErrorCode::DimensionMismatch, "model expects " + std::to_string(model_d) + " covariates, data has " +
                                           std::to_string(data.num_covariates()));
  }
}

void warn_if_small(const ObservationalDataset& data, Index num_params, std::string_view what) {
  if (data.size() <= num_params) {
    warn(std::string(what) + ": n=" + std::to_string(data.size()) + " is small for " +
         std::to_string(num_params) + " parameters");
  }
}

}  // namespace

std::string_view to_string(GpsModelType type) noexcept {
  return type == GpsModelType::multinomial_logit ? "multinomial_logit" : "continuation_ratio";
}

GpsModelType parse_gps_model_type(std::string_view name) {
  if (name == "multinomial" || name == "multinomial_logit") return GpsModelType::multinomial_logit;
  if (name == "continuation_ratio" || name == "cratio") return GpsModelType::continuation_ratio;
  fail(ErrorCode::InvalidArgument, "unknown GPS model '" + std::string(name) + "'");
}

MultinomialLogitModel::MultinomialLogitModel(Eigen::MatrixXd coef, FitDiagnostics diagnostics,
                                             std::vector<std::string> levels,
                                             std::vector<std::string> covariate_names)
    : coef_(std::move(coef)),
      diagnostics_(std::move(diagnostics)),
      levels_(std::move(levels)),
      covariate_names_(std::move(covariate_names)) {
  if (coef_.rows() < 1 || coef_.cols() < 1) fail(ErrorCode::InvalidArgument, "empty coefficient matrix");
}

Eigen::MatrixXd MultinomialLogitModel::log_probs(const Eigen::MatrixXd& x) const {
  if (x.cols() != num_covariates()) fail(ErrorCode::DimensionMismatch, "covariate count differs from model");
  const MatrixXd eta_rest =
      (x * coef_.rightCols(num_covariates()).transpose()).rowwise() + coef_.col(0).transpose();
  return mnl_log_probs_from_linear(eta_rest);
}

ContinuationRatioModel::ContinuationRatioModel(Eigen::VectorXd thresholds, Eigen::VectorXd slopes,
                                               FitDiagnostics diagnostics, std::vector<std::string> levels,
                                               std::vector<std::string> covariate_names)
    : thresholds_(std::move(thresholds)),
      slopes_(std::move(slopes)),
      diagnostics_(std::move(diagnostics)),
      levels_(std::move(levels)),
      covariate_names_(std::move(covariate_names)) {
  if (thresholds_.size() < 1) fail(ErrorCode::InvalidArgument, "continuation-ratio model needs J >= 2");
}

Eigen::MatrixXd ContinuationRatioModel::coef() const {
  MatrixXd c(thresholds_.size(), slopes_.size() + 1);
  c.col(0) = thresholds_;
  c.rightCols(slopes_.size()).rowwise() = slopes_.transpose();
  return c;
}

Eigen::MatrixXd ContinuationRatioModel::log_probs(const Eigen::MatrixXd& x) const {
  if (x.cols() != num_covariates()) fail(ErrorCode::DimensionMismatch, "covariate count differs from model");
  const VectorXd lin = x * slopes_;
  const MatrixXd eta = (MatrixXd(lin.replicate(1, thresholds_.size())).rowwise() + thresholds_.transpose());
  return cr_log_probs_from_linear(eta);
}

MultinomialLogitModel fit_multinomial_logit(const ObservationalDataset& data, const FitConfig& config) {
  require_all_levels(data);
  const Index n = data.size();
  const Index d = data.num_covariates();
  const Index p = d + 1;
  const int J = data.num_levels();
  const Index jm1 = J - 1;
  warn_if_small(data, J * p, "multinomial logit");

  const Scaling s = column_scaling(data.covariates(), config.standardize);
  MatrixXd Z(n, p);
  Z.col(0).setOnes();
  Z.rightCols(d) = standardized(data.covariates(), s);
  MatrixXd D = MatrixXd::Zero(n, J);
  for (Index i = 0; i < n; ++i) D(i, data.treatment()[i] - 1) = 1.0;
  const double inv_n = 1.0 / static_cast<double>(n);

  // theta layout: block a (level a+2) occupies [a*p, (a+1)*p).
  auto unpack = [&](const VectorXd& theta) {
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(theta.data(),
                                                                                                    jm1, p);
  };
  Evaluator evaluate = [&](const VectorXd& theta, bool derivs) {
    Evaluation e;
    const MatrixXd logp = mnl_log_probs_from_linear(Z * unpack(theta).transpose());
    e.value = (logp.array() * D.array()).sum() * inv_n;
    e.min_log_prob = logp.minCoeff();
    if (!derivs) return e;
    const MatrixXd P = logp.array().exp().matrix();
    e.grad.resize(jm1 * p);
    e.hess.resize(jm1 * p, jm1 * p);
    for (Index a = 0; a < jm1; ++a) {
      e.grad.segment(a * p, p) = Z.transpose() * (D.col(a + 1) - P.col(a + 1)) * inv_n;
      for (Index b = a; b < jm1; ++b) {
        VectorXd w = -P.col(a + 1).cwiseProduct(P.col(b + 1));
        if (a == b) w += P.col(a + 1);
        const MatrixXd block = -(Z.transpose() * w.asDiagonal() * Z) * inv_n;
        e.hess.block(a * p, b * p, p, p) = block;
        if (a != b) e.hess.block(b * p, a * p, p, p) = block.transpose();
      }
    }
    return e;
  };

  VectorXd theta = VectorXd::Zero(jm1 * p);
  if (config.initial_coef) {
    const MatrixXd& c0 = *config.initial_coef;
    if (c0.rows() != jm1 || c0.cols() != p) fail(ErrorCode::DimensionMismatch, "initial_coef shape");
    for (Index a = 0; a < jm1; ++a) {
      theta[a * p] = c0(a, 0) + c0.row(a).tail(d).dot(s.mean);
      for (Index j = 0; j < d; ++j) theta[a * p + 1 + j] = c0(a, 1 + j) * s.scale[j];
    }
  }
  VectorXd mask = VectorXd::Ones(jm1 * p);
  for (Index a = 0; a < jm1; ++a) mask[a * p] = 0.0;

  FitDiagnostics diag;
  theta = newton_maximize(evaluate, theta, mask, config, diag, "multinomial logit");
  diag.loglik = evaluate(theta, false).value * static_cast<double>(n);

  MatrixXd coef(jm1, p);
  for (Index a = 0; a < jm1; ++a) {
    double intercept = theta[a * p];
    for (Index j = 0; j < d; ++j) {
      coef(a, 1 + j) = theta[a * p + 1 + j] / s.scale[j];
      intercept -= coef(a, 1 + j) * s.mean[j];
    }
    coef(a, 0) = intercept;
  }
  return MultinomialLogitModel(std::move(coef), std::move(diag), data.level_labels(), data.covariate_names());
}

ContinuationRatioModel fit_continuation_ratio(const ObservationalDataset& data, const FitConfig& config) {
  require_all_levels(data);
  const Index n = data.size();
  const Index d = data.num_covariates();
  const int J = data.num_levels();
  const Index jm1 = J - 1;
  const Index np = jm1 + d;
  warn_if_small(data, J * (d + 1), "continuation-ratio model");

  const Scaling s = column_scaling(data.covariates(), config.standardize);
  const MatrixXd Z = standardized(data.covariates(), s);
  const Eigen::VectorXi& A = data.treatment();
  const double inv_n = 1.0 / static_cast<double>(n);

  Evaluator evaluate = [&](const VectorXd& theta, bool derivs) {
    Evaluation e;
    const VectorXd lin = Z * theta.tail(d);
    MatrixXd eta(n, jm1);
    for (Index a = 0; a < jm1; ++a) eta.col(a) = lin.array() + theta[a];
    const MatrixXd logp = cr_log_probs_from_linear(eta);
    double ll = 0.0;
    for (Index i = 0; i < n; ++i) ll += logp(i, A[i] - 1);
    e.value = ll * inv_n;
    e.min_log_prob = logp.minCoeff();
    if (!derivs) return e;

    // Residual and weight of each at-risk continuation equation; zero when
    // unit i stopped before equation a.
    MatrixXd resid = MatrixXd::Zero(n, jm1);
    MatrixXd weight = MatrixXd::Zero(n, jm1);
    for (Index i = 0; i < n; ++i) {
      const Index last = std::min<Index>(A[i], jm1);
      for (Index a = 0; a < last; ++a) {
        const double mu = sigmoid(eta(i, a));
        resid(i, a) = (A[i] == a + 1 ? 1.0 : 0.0) - mu;
        weight(i, a) = mu * (1.0 - mu);
      }
    }
    const VectorXd r_unit = resid.rowwise().sum();
    const VectorXd w_unit = weight.rowwise().sum();
    e.grad.resize(np);
    e.grad.head(jm1) = resid.colwise().sum().transpose() * inv_n;
    e.grad.tail(d) = Z.transpose() * r_unit * inv_n;
    e.hess = MatrixXd::Zero(np, np);
    e.hess.topLeftCorner(jm1, jm1).diagonal() = -weight.colwise().sum().transpose() * inv_n;
    const MatrixXd cross = -(Z.transpose() * weight) * inv_n;  // d x (J-1)
    e.hess.bottomLeftCorner(d, jm1) = cross;
    e.hess.topRightCorner(jm1, d) = cross.transpose();
    e.hess.bottomRightCorner(d, d) = -(Z.transpose() * w_unit.asDiagonal() * Z) * inv_n;
    return e;
  };

  VectorXd theta = VectorXd::Zero(np);
  if (config.initial_coef) {
    const MatrixXd& c0 = *config.initial_coef;
    if (c0.rows() != jm1 || c0.cols() != d + 1) fail(ErrorCode::DimensionMismatch, "initial_coef shape");
    const VectorXd gamma = c0.row(0).tail(d).transpose();
    for (Index a = 0; a < jm1; ++a) theta[a] = c0(a, 0) + gamma.dot(s.mean);
    theta.tail(d) = gamma.cwiseProduct(s.scale);
  }
  VectorXd mask = VectorXd::Ones(np);
  mask.head(jm1).setZero();

  FitDiagnostics diag;
  theta = newton_maximize(evaluate, theta, mask, config, diag, "continuation-ratio model");
  diag.loglik = evaluate(theta, false).value * static_cast<double>(n);

  const VectorXd slopes = theta.tail(d).cwiseQuotient(s.scale);
  const VectorXd thresholds = theta.head(jm1).array() - slopes.dot(s.mean);
  return ContinuationRatioModel(thresholds, slopes, std::move(diag), data.level_labels(), data.covariate_names());
}

GpsModel fit_gps(GpsModelType type, const ObservationalDataset& data, const FitConfig& config) {
  if (type == GpsModelType::multinomial_logit) return fit_multinomial_logit(data, config);
  return fit_continuation_ratio(data, config);
}

GpsModelType model_type(const GpsModel& model) noexcept {
  return std::holds_alternative<MultinomialLogitModel>(model) ? GpsModelType::multinomial_logit
                                                              : GpsModelType::continuation_ratio;
}

const FitDiagnostics& diagnostics(const GpsModel& model) noexcept {
  return std::visit([](const auto& m) -> const FitDiagnostics& { return m.diagnostics(); }, model);
}

Eigen::MatrixXd coefficients(const GpsModel& model) {
  return std::visit([](const auto& m) -> MatrixXd { return m.coef(); }, model);
}

GpsMatrix gps_from_log_probs(const Eigen::MatrixXd& log_probs) {
  const Index n = log_probs.rows();
  const Index J = log_probs.cols();
  GpsMatrix g{log_probs.array().exp().matrix(), MatrixXd(n, J)};
  for (Index i = 0; i < n; ++i) {
    for (Index a = 0; a < J; ++a) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Index b = 0; b < J; ++b) {
        if (b != a) mx = std::max(mx, log_probs(i, b));
      }
      double sum = 0.0;
      for (Index b = 0; b < J; ++b) {
        if (b != a) sum += std::exp(log_probs(i, b) - mx);
      }
      g.logits(i, a) = log_probs(i, a) - (mx + std::log(sum));
    }
  }
  return g;
}

GpsMatrix predict_gps(const MultinomialLogitModel& model, const ObservationalDataset& data) {
  check_dimension(model.num_covariates(), data);
  if (model.num_levels() != data.num_levels()) fail(ErrorCode::DimensionMismatch, "level count differs from model");
  return gps_from_log_probs(model.log_probs(data.covariates()));
}

GpsMatrix predict_gps(const ContinuationRatioModel& model, const ObservationalDataset& data) {
  check_dimension(model.num_covariates(), data);
  if (model.num_levels() != data.num_levels()) fail(ErrorCode::DimensionMismatch, "level count differs from model");
  return gps_from_log_probs(model.log_probs(data.covariates()));
}

GpsMatrix predict_gps(const GpsModel& model, const ObservationalDataset& data) {
  return std::visit([&](const auto& m) { return predict_gps(m, data); }, model);
}

std::string model_to_json(const GpsModel& model) {
  using nlohmann::json;
  const MatrixXd c = coefficients(model);
  json j;
  j["model_type"] = std::string(to_string(model_type(model)));
  std::visit(
      [&](const auto& m) {
        j["levels"] = m.levels();
        j["covariate_names"] = m.covariate_names();
      },
      model);
  j["coef_shape"] = {c.rows(), c.cols()};
  std::vector<double> flat;
  for (Index r = 0; r < c.rows(); ++r) {
    for (Index k = 0; k < c.cols(); ++k) flat.push_back(c(r, k));
  }
  j["coef"] = flat;
  const FitDiagnostics& dg = diagnostics(model);
  j["fit_diagnostics"] = {{"loglik", dg.loglik}, {"iterations", dg.iterations}, {"grad_norm", dg.grad_norm},
                          {"ridge_fallback", dg.ridge_fallback}};
  return j.dump(2);
}

GpsModel model_from_json(const std::string& text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("model JSON: ") + e.what());
  }
  try {
    const auto type = parse_gps_model_type(j.at("model_type").get<std::string>());
    const auto shape = j.at("coef_shape").get<std::vector<Index>>();
    const auto flat = j.at("coef").get<std::vector<double>>();
    if (shape.size() != 2 || static_cast<Index>(flat.size()) != shape[0] * shape[1]) {
      fail(ErrorCode::ParseError, "model JSON: coef does not match coef_shape");
    }
    MatrixXd c(shape[0], shape[1]);
    for (Index r = 0; r < c.rows(); ++r) {
      for (Index k = 0; k < c.cols(); ++k) c(r, k) = flat[r * c.cols() + k];
    }
    FitDiagnostics dg;
    if (j.contains("fit_diagnostics")) {
      const auto& f = j["fit_diagnostics"];
      dg.loglik = f.value("loglik", 0.0);
      dg.iterations = f.value("iterations", 0);
      dg.grad_norm = f.value("grad_norm", 0.0);
      dg.ridge_fallback = f.value("ridge_fallback", false);
    }
    auto levels = j.value("levels", std::vector<std::string>{});
    auto names = j.value("covariate_names", std::vector<std::string>{});
    if (type == GpsModelType::multinomial_logit) {
      return MultinomialLogitModel(std::move(c), std::move(dg), std::move(levels), std::move(names));
    }
    const VectorXd slopes = c.row(0).tail(c.cols() - 1).transpose();
    for (Index r = 1; r < c.rows(); ++r) {
      if (c.row(r).tail(c.cols() - 1) != slopes.transpose()) {
        fail(ErrorCode::ParseError, "model JSON: continuation-ratio slopes must be shared across rows");
      }
    }
    return ContinuationRatioModel(c.col(0), slopes, std::move(dg), std::move(levels), std::move(names));
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("model JSON: ") + e.what());
  }
}

}  // namespace mvsens
