#include "mvsens/error.hpp"
#include "mvsens/gps.hpp"
#include "mvsens/log.hpp"
#include "mvsens/simulation.hpp"
#include "mvsens/verify.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <random>

using namespace mvsens;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

namespace {

void check_simplex(const GpsMatrix& g, double tol = 1e-10) {
  for (Index i = 0; i < g.probs.rows(); ++i) {
    REQUIRE(std::abs(g.probs.row(i).sum() - 1.0) <= tol);
    REQUIRE((g.probs.row(i).array() > 0.0).all());
    REQUIRE((g.probs.row(i).array() < 1.0).all());
  }
}

ObservationalDataset counts_dataset(const std::vector<int>& counts, double covariate) {
  Index n = 0;
  for (int c : counts) n += c;
  VectorXi a(n);
  Index i = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    for (int j = 0; j < counts[k]; ++j) a[i++] = static_cast<int>(k) + 1;
  }
  return ObservationalDataset(a, MatrixXd::Constant(n, 1, covariate), VectorXd::Zero(n),
                              static_cast<int>(counts.size()));
}

}  // namespace

TEST_CASE("zero-coefficient models give uniform probabilities") {
  MatrixXd x(4, 2);
  x << 0, 0, 1, -2, 3.5, 7, -1, 0.25;
  for (int J : {2, 3, 5}) {
    const MultinomialLogitModel m(MatrixXd::Zero(J - 1, 3));
    const MatrixXd p = m.log_probs(x).array().exp();
    CHECK((p.array() - 1.0 / J).abs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("dominant level") {
  MatrixXd coef(2, 2);
  coef << 0.0, 0.0,
      0.0, 5.0;
  const MultinomialLogitModel m(coef);
  const MatrixXd p = m.log_probs(MatrixXd::Constant(1, 1, 1.0)).array().exp();
  Index arg = 0;
  p.row(0).maxCoeff(&arg);
  CHECK(arg + 1 == 3);
  CHECK(p.row(0).sum() == doctest::Approx(1.0).epsilon(1e-14));
  coef << 4.0, 0.0, 0.0, 0.0;
  const MatrixXd q = MultinomialLogitModel(coef).log_probs(MatrixXd::Constant(1, 1, 1.0)).array().exp();
  q.row(0).maxCoeff(&arg);
  CHECK(arg + 1 == 2);
}

TEST_CASE("intercept-only fits reproduce empirical shares") {
  const auto data = counts_dataset({545, 328, 234}, 2.0);
  const double n = 1107.0;
  for (auto type : {GpsModelType::multinomial_logit, GpsModelType::continuation_ratio}) {
    const auto gps = predict_gps(fit_gps(type, data), data);
    CHECK(std::abs(gps.probs(0, 0) - 545 / n) < 1e-6);
    CHECK(std::abs(gps.probs(0, 1) - 328 / n) < 1e-6);
    CHECK(std::abs(gps.probs(0, 2) - 234 / n) < 1e-6);
    CHECK(std::abs(gps.probs(0, 0) - 0.4923) < 1e-4);
    CHECK(std::abs(gps.probs(0, 1) - 0.2963) < 1e-4);
    CHECK(std::abs(gps.probs(0, 2) - 0.2114) < 1e-4);
  }
}

TEST_CASE("multinomial fit agrees with an independent gradient-ascent maximizer") {
  auto cfg = sim::ScenarioConfig::make(sim::Scenario::I, 200, 5);
  const auto data = sim::generate_dataset(cfg);
  const auto fit = fit_multinomial_logit(data);
  const MatrixXd ref = oracle::mnl_gradient_ascent(data.covariates(), data.treatment(), 3);
  const double ll_ref = oracle::mnl_loglik(ref, data.covariates(), data.treatment());
  const double ll_fit = oracle::mnl_loglik(fit.coef(), data.covariates(), data.treatment());
  CHECK(std::abs(ll_fit - ll_ref) < 1e-6);
  CHECK(std::abs(fit.diagnostics().loglik - ll_fit) < 1e-8);
  CHECK(ll_fit >= ll_ref - 1e-9);

  // Coefficients within 3 standard errors of the generating values.
  const MatrixXd se = oracle::mnl_standard_errors(fit.coef(), data.covariates(), data.treatment());
  const MatrixXd truth = cfg.beta.bottomRows(2);
  for (Index r = 0; r < 2; ++r) {
    for (Index c = 0; c < 4; ++c) {
      CHECK(std::abs(fit.coef()(r, c) - truth(r, c)) <= 3.0 * se(r, c));
    }
  }
}

TEST_CASE("J=2 fits coincide with binary logistic regression") {
  Rng rng = make_stream(3, StreamDomain::verify, 77);
  for (int rep = 0; rep < 5; ++rep) {
    const auto data = verify::random_dataset(300, 2, 3, rng);
    VectorXd y01(data.size());
    for (Index i = 0; i < data.size(); ++i) y01[i] = data.treatment()[i] == 2 ? 1.0 : 0.0;
    const VectorXd p2 = oracle::logistic_probs(data.covariates(), y01);
    const auto mnl = predict_gps(fit_multinomial_logit(data), data);
    CHECK((mnl.probs.col(1) - p2).cwiseAbs().maxCoeff() < 1e-8);
    const auto cr = predict_gps(fit_continuation_ratio(data), data);
    CHECK((cr.probs.col(1) - p2).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("relabeling levels leaves predicted probabilities unchanged") {
  Rng rng = make_stream(4, StreamDomain::verify, 78);
  const auto data = verify::random_dataset(400, 3, 2, rng);
  const auto base = predict_gps(fit_multinomial_logit(data), data);
  // New level 1 is old level 3, so the reference changes.
  const std::array<int, 3> perm{3, 1, 2};  // old level -> new level
  VectorXi t(data.size());
  for (Index i = 0; i < data.size(); ++i) t[i] = perm[data.treatment()[i] - 1];
  const ObservationalDataset relabeled(t, data.covariates(), data.outcome(), 3);
  const auto fit2 = fit_multinomial_logit(relabeled);
  const auto moved = predict_gps(fit2, relabeled);
  for (int old = 1; old <= 3; ++old) {
    CHECK((base.probs.col(old - 1) - moved.probs.col(perm[old - 1] - 1)).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK(!fit2.coef().isApprox(fit_multinomial_logit(data).coef()));
}

TEST_CASE("simplex property and likelihood ascent") {
  Rng rng = make_stream(5, StreamDomain::verify, 79);
  for (int rep = 0; rep < 10; ++rep) {
    const int J = 2 + rep % 4;
    const auto data = verify::random_dataset(250, J, 1 + rep % 3, rng);
    for (auto type : {GpsModelType::multinomial_logit, GpsModelType::continuation_ratio}) {
      const auto model = fit_gps(type, data);
      check_simplex(predict_gps(model, data));
      const auto& trace = diagnostics(model).objective_trace;
      for (std::size_t k = 1; k < trace.size(); ++k) CHECK(trace[k] >= trace[k - 1] - 1e-13);
    }
  }
}

TEST_CASE("logits are computed in log space") {
  MatrixXd lp(1, 3);
  lp << std::log(1 - 2e-20), std::log(1e-20), std::log(1e-20);
  const auto g = gps_from_log_probs(lp);
  CHECK(g.logits(0, 1) == doctest::Approx(std::log(1e-20) - std::log(1 - 1e-20)).epsilon(1e-12));
  CHECK(g.logits(0, 0) == doctest::Approx(std::log(1 - 2e-20) - std::log(2e-20)).epsilon(1e-12));
  CHECK(std::isfinite(g.logits(0, 0)));
}

TEST_CASE("separable data raises SeparationDetected without ridge") {
  const Index n = 20;
  VectorXi a(n);
  MatrixXd x(n, 1);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = static_cast<double>(i) - 9.5;
    a[i] = x(i, 0) > 0 ? 2 : 1;
  }
  const ObservationalDataset data(a, x, VectorXd::Zero(n), 2);
  for (auto type : {GpsModelType::multinomial_logit, GpsModelType::continuation_ratio}) {
    try {
      fit_gps(type, data);
      FAIL("expected SeparationDetected");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SeparationDetected);
    }
    FitConfig cfg;
    cfg.ridge = 1e-2;
    check_simplex(predict_gps(fit_gps(type, data, cfg), data));
  }
}

TEST_CASE("small samples warn") {
  std::vector<std::string> seen;
  auto prev = set_warning_sink([&](std::string_view m) { seen.emplace_back(m); });
  VectorXi a(5);
  a << 1, 2, 1, 2, 1;
  MatrixXd x(5, 1);
  x << 0.1, 0.3, 0.9, 0.2, 0.5;
  FitConfig cfg;
  cfg.ridge = 1.0;
  fit_multinomial_logit(ObservationalDataset(a, x, VectorXd::Zero(5), 2), cfg);
  set_warning_sink(prev);
  CHECK(seen.empty());
  seen.clear();
  prev = set_warning_sink([&](std::string_view m) { seen.emplace_back(m); });
  a.resize(2);
  a << 1, 2;
  try {
    fit_multinomial_logit(ObservationalDataset(a, MatrixXd::Constant(2, 1, 0.5), VectorXd::Zero(2), 2), cfg);
  } catch (const Error&) {
  }
  set_warning_sink(prev);
  CHECK(!seen.empty());
}

TEST_CASE("predict rejects mismatched dimensions and JSON round trips") {
  Rng rng = make_stream(6, StreamDomain::verify, 80);
  const auto data = verify::random_dataset(200, 3, 2, rng);
  const auto other = verify::random_dataset(50, 3, 3, rng);
  for (auto type : {GpsModelType::multinomial_logit, GpsModelType::continuation_ratio}) {
    const GpsModel model = fit_gps(type, data);
    try {
      predict_gps(model, other);
      FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DimensionMismatch);
    }
    const GpsModel back = model_from_json(model_to_json(model));
    CHECK(model_type(back) == type);
    CHECK(coefficients(back) == coefficients(model));
    CHECK(predict_gps(back, data).probs == predict_gps(model, data).probs);
  }
  CHECK(parse_gps_model_type("cratio") == GpsModelType::continuation_ratio);
  CHECK_THROWS_AS(parse_gps_model_type("probit"), Error);
}

TEST_CASE("warm start reaches the same optimum") {
  Rng rng = make_stream(7, StreamDomain::verify, 81);
  const auto data = verify::random_dataset(300, 4, 2, rng);
  for (auto type : {GpsModelType::multinomial_logit, GpsModelType::continuation_ratio}) {
    const GpsModel cold = fit_gps(type, data);
    FitConfig warm;
    warm.initial_coef = coefficients(cold);
    const GpsModel hot = fit_gps(type, data, warm);
    CHECK(diagnostics(hot).iterations <= 2);
    CHECK((predict_gps(hot, data).probs - predict_gps(cold, data).probs).cwiseAbs().maxCoeff() < 1e-10);
  }
}
