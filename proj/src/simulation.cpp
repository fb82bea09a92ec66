#include "mvsens/simulation.hpp"

#include "mvsens/csv.hpp"
#include "mvsens/error.hpp"
#include "mvsens/parallel.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>

namespace mvsens::sim {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

std::string_view to_string(Scenario s) noexcept {
  switch (s) {
    case Scenario::I: return "I";
    case Scenario::II: return "II";
    case Scenario::custom: return "custom";
  }
  return "?";
}

Scenario parse_scenario(std::string_view name) {
  if (name == "I" || name == "1") return Scenario::I;
  if (name == "II" || name == "2") return Scenario::II;
  if (name == "custom") return Scenario::custom;
  fail(ErrorCode::InvalidArgument, "unknown scenario '" + std::string(name) + "' (expected I, II or custom)");
}

namespace {

Eigen::Matrix<double, 3, 4> make_beta(double k2, double k3) {
  Eigen::Matrix<double, 3, 4> b;
  b << 0, 0, 0, 0,
      0, k2, k2, k2,
      0, k3, k3, -k3;
  return b;
}

Eigen::Matrix<double, 3, 4> default_delta() {
  Eigen::Matrix<double, 3, 4> d;
  d << 1, 1, 1, 1,
      1, 1, -1, 1,
      1, 1, 1, -1;
  return d;
}

// Log-softmax of the linear predictors (1, x) * coef' for one unit.
Eigen::Vector3d log_softmax(const Eigen::Matrix<double, 3, 4>& coef, const Eigen::Vector4d& x1) {
  const Eigen::Vector3d eta = coef * x1;
  const double m = eta.maxCoeff();
  const double lse = m + std::log((eta.array() - m).exp().sum());
  return eta.array() - lse;
}

int draw_category(const Eigen::Vector3d& log_p, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (int k = 0; k < 2; ++k) {
    acc += std::exp(log_p[k]);
    if (u < acc) return k;
  }
  return 2;
}

// Per-unit draw order: X1, X2, X3, treatment, outcome category. Drawing unit
// by unit keeps a prefix of a larger draw identical to a smaller one.
struct UnitDraw {
  Eigen::Vector4d x;
  int treatment;  // 1-based
  double outcome;
};

class UnitSampler {
 public:
  explicit UnitSampler(const ScenarioConfig& c) : c_(c), x3_(0.0, c.x3_sd) {}

  UnitDraw operator()(Rng& rng) {
    UnitDraw u;
    u.x[0] = 1.0;
    u.x[1] = x1_(rng) ? 1.0 : 0.0;
    u.x[2] = x2_(rng);
    u.x[3] = x3_(rng);
    const int a = draw_category(log_softmax(c_.beta, u.x), rng);
    const int k = draw_category(log_softmax(c_.delta, u.x), rng);
    u.treatment = a + 1;
    u.outcome = k == a ? 1.0 : 0.0;
    return u;
  }

 private:
  const ScenarioConfig& c_;
  std::bernoulli_distribution x1_{0.5};
  std::uniform_real_distribution<double> x2_{-1.0, 1.0};
  std::normal_distribution<double> x3_;
};

std::vector<std::string> level_labels() { return {"1", "2", "3"}; }

}  // namespace

ScenarioConfig ScenarioConfig::make(Scenario s, Index n, std::uint64_t seed) {
  ScenarioConfig c;
  c.scenario = s;
  c.n = n;
  c.seed = seed;
  if (s == Scenario::II) {
    c.k2 = 3.0;
    c.k3 = 3.0;
  } else if (s == Scenario::custom) {
    fail(ErrorCode::InvalidArgument, "custom scenarios need explicit k2, k3; use ScenarioConfig::custom");
  }
  c.beta = make_beta(c.k2, c.k3);
  c.delta = default_delta();
  return c;
}

ScenarioConfig ScenarioConfig::custom(double k2, double k3, Index n, std::uint64_t seed) {
  ScenarioConfig c;
  c.scenario = Scenario::custom;
  c.n = n;
  c.k2 = k2;
  c.k3 = k3;
  c.seed = seed;
  c.beta = make_beta(k2, k3);
  c.delta = default_delta();
  return c;
}

void ScenarioConfig::validate() const {
  if (n < 1) fail(ErrorCode::InvalidArgument, "scenario sample size must be >= 1");
  if (!(x3_sd > 0.0) || !std::isfinite(x3_sd)) fail(ErrorCode::InvalidArgument, "x3_sd must be positive and finite");
  if (!std::isfinite(k2) || !std::isfinite(k3)) fail(ErrorCode::InvalidArgument, "k2 and k3 must be finite");
  if (scenario == Scenario::I && (k2 != 0.1 || k3 != -0.1)) {
    fail(ErrorCode::InvalidArgument, "scenario I fixes (k2, k3) = (0.1, -0.1)");
  }
  if (scenario == Scenario::II && (k2 != 3.0 || k3 != 3.0)) {
    fail(ErrorCode::InvalidArgument, "scenario II fixes (k2, k3) = (3, 3)");
  }
  if (!beta.allFinite() || !delta.allFinite()) fail(ErrorCode::NonFiniteValue, "scenario coefficients must be finite");
}

GpsMatrix true_gps(const ScenarioConfig& config, const MatrixXd& covariates) {
  if (covariates.cols() != 3) fail(ErrorCode::DimensionMismatch, "scenario covariates have 3 columns");
  MatrixXd lp(covariates.rows(), 3);
  for (Index i = 0; i < covariates.rows(); ++i) {
    const Eigen::Vector4d x(1.0, covariates(i, 0), covariates(i, 1), covariates(i, 2));
    lp.row(i) = log_softmax(config.beta, x).transpose();
  }
  return gps_from_log_probs(lp);
}

MatrixXd outcome_probs(const ScenarioConfig& config, const MatrixXd& covariates) {
  if (covariates.cols() != 3) fail(ErrorCode::DimensionMismatch, "scenario covariates have 3 columns");
  MatrixXd p(covariates.rows(), 3);
  for (Index i = 0; i < covariates.rows(); ++i) {
    const Eigen::Vector4d x(1.0, covariates(i, 0), covariates(i, 1), covariates(i, 2));
    p.row(i) = log_softmax(config.delta, x).array().exp().transpose();
  }
  return p;
}

MatrixXd draw_covariates(const ScenarioConfig& config, Index n, Rng& rng) {
  std::bernoulli_distribution x1(0.5);
  std::uniform_real_distribution<double> x2(-1.0, 1.0);
  std::normal_distribution<double> x3(0.0, config.x3_sd);
  MatrixXd x(n, 3);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = x1(rng) ? 1.0 : 0.0;
    x(i, 1) = x2(rng);
    x(i, 2) = x3(rng);
  }
  return x;
}

ObservationalDataset generate_dataset(const ScenarioConfig& config, Rng& rng) {
  config.validate();
  UnitSampler sample(config);
  VectorXi a(config.n);
  MatrixXd x(config.n, 3);
  VectorXd y(config.n);
  for (Index i = 0; i < config.n; ++i) {
    const UnitDraw u = sample(rng);
    a[i] = u.treatment;
    x.row(i) = u.x.tail<3>().transpose();
    y[i] = u.outcome;
  }
  return ObservationalDataset(std::move(a), std::move(x), std::move(y), 3, {"x1", "x2", "x3"}, level_labels());
}

ObservationalDataset generate_dataset(const ScenarioConfig& config) {
  Rng rng = make_stream(config.seed, StreamDomain::simulation_data, 0);
  return generate_dataset(config, rng);
}

PopulationOracle::PopulationOracle(const ScenarioConfig& config, Index N, std::uint64_t seed) : n_(N) {
  config.validate();
  if (N < 100'000) fail(ErrorCode::InvalidArgument, "oracle size N must be >= 1e5");
  Rng rng = make_stream(seed, StreamDomain::oracle, 0);
  UnitSampler sample(config);
  std::vector<std::vector<double>> ys(3);
  std::vector<std::vector<double>> gs(3);
  for (Index i = 0; i < N; ++i) {
    const UnitDraw u = sample(rng);
    const int a = u.treatment - 1;
    const Eigen::Vector3d lp = log_softmax(config.beta, u.x);
    // logit of r_a in log space: log r_a - log(1 - r_a)
    double rest = -std::numeric_limits<double>::infinity();
    for (int b = 0; b < 3; ++b) {
      if (b == a) continue;
      const double hi = std::max(rest, lp[b]);
      rest = hi + std::log(std::exp(rest - hi) + std::exp(lp[b] - hi));
    }
    ys[a].push_back(u.outcome);
    gs[a].push_back(lp[a] - rest);
  }
  for (int a = 0; a < 3; ++a) {
    if (ys[a].empty()) fail(ErrorCode::EmptyTreatmentLevel, "oracle draw has no units at level " + std::to_string(a + 1));
    const Eigen::Map<const VectorXd> y(ys[a].data(), static_cast<Index>(ys[a].size()));
    const Eigen::Map<const VectorXd> g(gs[a].data(), static_cast<Index>(gs[a].size()));
    arms_.emplace_back(y, g, a + 1);
  }
}

std::vector<ArmExtrema> PopulationOracle::extrema(const SensitivityParams& params) const {
  std::vector<ArmExtrema> out;
  for (const auto& arm : arms_) out.push_back(arm.solve(params, Direction::both, false));
  return out;
}

ContrastResult PopulationOracle::interval(const ContrastVector& c, const SensitivityParams& params) const {
  const auto ext = extrema(params);
  return contrast_interval(ext, c);
}

OracleInterval true_interval_oracle(const ScenarioConfig& config, const ContrastVector& c,
                                    const SensitivityParams& params, Index N) {
  const std::uint64_t seed = config.seed;
  const PopulationOracle base(config, N, seed);
  const PopulationOracle doubled(config, 2 * N, seed);
  const ContrastResult r1 = base.interval(c, params);
  const ContrastResult r2 = doubled.interval(c, params);
  OracleInterval out;
  out.lo = r1.lo;
  out.hi = r1.hi;
  out.lo_doubled = r2.lo;
  out.hi_doubled = r2.hi;
  out.N = N;
  out.stable = std::abs(r1.lo - r2.lo) < 0.005 && std::abs(r1.hi - r2.hi) < 0.005;
  return out;
}

const EstimandMetrics& StudyMetrics::row(const std::string& estimand, double lambda) const {
  for (const auto& r : rows) {
    if (r.estimand == estimand && r.lambda == lambda) return r;
  }
  fail(ErrorCode::InvalidArgument, "no study row for " + estimand + " at lambda " + std::to_string(lambda));
}

namespace {

struct ReplicationResult {
  bool ok = false;
  std::string failure;
  long redraws = 0;
  // [contrast][lambda] -> point lo, point hi, ci lo, ci hi
  std::vector<std::array<double, 4>> cells;
};

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

StudyMetrics run_study(const StudyConfig& config) {
  config.scenario.validate();
  if (config.R < 1) fail(ErrorCode::InvalidArgument, "study needs R >= 1");
  if (config.lambdas.empty()) fail(ErrorCode::InvalidArgument, "study needs at least one lambda");
  for (double lam : config.lambdas) {
    if (!(lam >= 0.0) || !std::isfinite(lam)) fail(ErrorCode::InvalidArgument, "lambdas must be finite and >= 0");
  }
  std::vector<double> lambdas = config.lambdas;
  std::sort(lambdas.begin(), lambdas.end());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  std::vector<SensitivityParams> params;
  for (double lam : lambdas) params.push_back(SensitivityParams::from_lambda(lam));

  const auto contrasts = all_pairwise_contrasts(3);
  const std::size_t C = contrasts.size();
  const std::size_t K = lambdas.size();
  const std::uint64_t seed = config.scenario.seed;

  StudyMetrics metrics;
  metrics.R = config.R;

  // Ground truth: one population draw, reused across contrasts and lambdas.
  const PopulationOracle oracle(config.scenario, config.oracle_N, seed);
  const PopulationOracle oracle2(config.scenario, 2 * config.oracle_N, seed);
  std::vector<std::vector<ArmExtrema>> truth(K);
  for (std::size_t k = 0; k < K; ++k) {
    truth[k] = oracle.extrema(params[k]);
    const auto wider = oracle2.extrema(params[k]);
    for (const auto& c : contrasts) {
      const auto r1 = contrast_interval(truth[k], c);
      const auto r2 = contrast_interval(wider, c);
      metrics.oracle_max_shift =
          std::max({metrics.oracle_max_shift, std::abs(r1.lo - r2.lo), std::abs(r1.hi - r2.hi)});
    }
  }

  std::vector<ReplicationResult> results(static_cast<std::size_t>(config.R));
  std::atomic<int> done{0};
  std::mutex progress_mutex;
  const GpsModelSpec spec{GpsModelType::multinomial_logit, config.fit};

  parallel_for(results.size(), config.threads, [&](std::size_t r) {
    ReplicationResult& out = results[r];
    try {
      Rng rng = make_stream(seed, StreamDomain::simulation_data, r);
      const ObservationalDataset data = generate_dataset(config.scenario, rng);
      const GpsModel model = fit_gps(GpsModelType::multinomial_logit, data, config.fit);
      const GpsMatrix gps = predict_gps(model, data);
      const auto ext = all_arm_extrema(data, gps, params, false);

      BootstrapConfig bc;
      bc.B = config.B;
      bc.alpha = config.alpha;
      bc.seed = derive_seed(seed, StreamDomain::simulation_bootstrap, r);
      bc.threads = 1;
      const auto boot = BootstrapReplicates::run(data, spec, lambdas, bc, &model);
      out.redraws = boot.diagnostics().redraws + boot.diagnostics().fit_failures;

      out.cells.resize(C * K);
      for (std::size_t j = 0; j < C; ++j) {
        for (std::size_t k = 0; k < K; ++k) {
          const auto point = contrast_interval(ext[k], contrasts[j]);
          const auto ci = boot.ci(contrasts[j], lambdas[k], config.alpha);
          out.cells[j * K + k] = {point.lo, point.hi, ci.lo, ci.hi};
        }
      }
      out.ok = true;
    } catch (const Error& e) {
      if (is_validation_error(e.code()) && e.code() != ErrorCode::EmptyTreatmentLevel) throw;
      out.failure = "replication " + std::to_string(r) + ": " + e.what();
    }
    const int finished = ++done;
    if (config.progress) {
      std::lock_guard lock(progress_mutex);
      config.progress(finished, config.R);
    }
  });

  std::vector<const ReplicationResult*> ok;
  for (const auto& res : results) {
    if (res.ok) {
      ok.push_back(&res);
      metrics.bootstrap_redraws += res.redraws;
    } else {
      ++metrics.failed_replications;
      metrics.failures.push_back(res.failure);
    }
  }

  for (std::size_t j = 0; j < C; ++j) {
    for (std::size_t k = 0; k < K; ++k) {
      EstimandMetrics m;
      m.estimand = contrasts[j].label();
      m.lambda = lambdas[k];
      m.Lambda = params[k].Lambda;
      const auto t = contrast_interval(truth[k], contrasts[j]);
      m.true_lo = t.lo;
      m.true_hi = t.hi;
      m.replications = static_cast<int>(ok.size());
      const double nan = std::numeric_limits<double>::quiet_NaN();
      if (ok.empty()) {
        m.pct_bias_lo = m.pct_bias_hi = m.noncoverage = nan;
        m.median_point_lo = m.median_point_hi = m.median_ci_lo = m.median_ci_hi = nan;
        metrics.rows.push_back(m);
        continue;
      }
      std::vector<double> plo, phi, clo, chi;
      int missed = 0;
      for (const auto* res : ok) {
        const auto& cell = res->cells[j * K + k];
        plo.push_back(cell[0]);
        phi.push_back(cell[1]);
        clo.push_back(cell[2]);
        chi.push_back(cell[3]);
        if (!(cell[2] <= t.lo && cell[3] >= t.hi)) ++missed;
      }
      m.noncoverage = static_cast<double>(missed) / static_cast<double>(ok.size());
      m.pct_bias_lo = 100.0 * (mean(plo) - t.lo) / sample_sd(plo);
      m.pct_bias_hi = 100.0 * (mean(phi) - t.hi) / sample_sd(phi);
      m.median_point_lo = quantile(plo, 0.5);
      m.median_point_hi = quantile(phi, 0.5);
      m.median_ci_lo = quantile(clo, 0.5);
      m.median_ci_hi = quantile(chi, 0.5);
      metrics.rows.push_back(m);
    }
  }
  return metrics;
}

std::string study_csv(const StudyMetrics& metrics) {
  std::ostringstream os;
  os << "estimand,lambda,Lambda,pct_bias_lo,pct_bias_hi,noncoverage,median_point_lo,median_point_hi,"
        "median_ci_lo,median_ci_hi,true_lo,true_hi,replications\n";
  char buf[64];
  auto num = [&](double v) -> const char* {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
  };
  for (const auto& r : metrics.rows) {
    os << csv_field(r.estimand) << ',' << num(r.lambda) << ',' << num(r.Lambda) << ',' << num(r.pct_bias_lo) << ','
       << num(r.pct_bias_hi) << ',' << num(r.noncoverage) << ',' << num(r.median_point_lo) << ','
       << num(r.median_point_hi) << ',' << num(r.median_ci_lo) << ',' << num(r.median_ci_hi) << ','
       << num(r.true_lo) << ',' << num(r.true_hi) << ',' << r.replications << '\n';
  }
  return os.str();
}

}  // namespace mvsens::sim
