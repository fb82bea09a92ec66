#include "mvsens/verify.hpp"

#include "mvsens/error.hpp"
#include "mvsens/estimands.hpp"
#include "mvsens/gps.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace mvsens::verify {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

namespace {

constexpr std::size_t kMaxCounterexamples = 5;
constexpr std::array<double, 4> kInstanceLambdas{0.1, 0.5, 1.0, 2.0};
constexpr std::array<double, 5> kNestingGrid{0.0, 0.1, 0.5, 1.0, 2.0};

std::string vec(const VectorXd& v) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ')';
  return os.str();
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void record(CheckResult& check, bool ok, const std::string& detail) {
  ++check.total;
  if (ok) {
    ++check.passed;
  } else if (check.counterexamples.size() < kMaxCounterexamples) {
    check.counterexamples.push_back(detail);
  }
}

std::string describe(const ArmInstance& inst) {
  return "n=" + std::to_string(inst.outcomes.size()) + " lambda=" + num(inst.params.lambda) +
         " y=" + vec(inst.outcomes) + " g=" + vec(inst.logits);
}

GpsMatrix fitted_gps(const ObservationalDataset& data) {
  FitConfig cfg;
  try {
    return predict_gps(fit_multinomial_logit(data, cfg), data);
  } catch (const Error& e) {
    if (is_validation_error(e.code())) throw;
  }
  cfg.ridge = 1e-3;
  return predict_gps(fit_multinomial_logit(data, cfg), data);
}

std::vector<ArmExtrema> solve_arms(const ArmSolver& solver, const ObservationalDataset& data, const GpsMatrix& gps,
                                   const SensitivityParams& params) {
  std::vector<ArmExtrema> out;
  for (int a = 1; a <= data.num_levels(); ++a) {
    const ArmData arm = arm_data(data, gps, a);
    ArmExtrema e = solver(arm.outcomes, arm.logits, params);
    e.arm = a;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ContrastVector> test_contrasts(int J, Rng& rng) {
  auto cs = all_pairwise_contrasts(J);
  std::normal_distribution<double> nd;
  VectorXd c(J);
  for (int a = 0; a < J; ++a) c[a] = nd(rng);
  cs.emplace_back(c);
  return cs;
}

}  // namespace

ArmSolver threshold_solver() {
  return [](const VectorXd& y, const VectorXd& g, const SensitivityParams& p) {
    return arm_extrema_threshold(y, g, p);
  };
}

ArmExtrema brute_force_extrema(const VectorXd& outcomes, const VectorXd& logits, const SensitivityParams& params) {
  const Index n = outcomes.size();
  if (n == 0) fail(ErrorCode::EmptyArm, "brute force on an empty arm");
  if (n > 20) fail(ErrorCode::InvalidArgument, "brute force is limited to 20 units");
  if (logits.size() != n) fail(ErrorCode::LengthMismatch, "outcomes and logits differ in length");
  ArmExtrema out;
  out.lambda = params.lambda;
  out.m_min = std::numeric_limits<double>::infinity();
  out.m_max = -std::numeric_limits<double>::infinity();
  out.point = sipw_estimate(outcomes, logits, VectorXd::Ones(n));
  VectorXd z(n);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    for (Index i = 0; i < n; ++i) z[i] = (mask >> i) & 1 ? params.Lambda : 1.0 / params.Lambda;
    const double v = sipw_estimate(outcomes, logits, z);
    if (v < out.m_min) {
      out.m_min = v;
      out.argmin_z = z;
    }
    if (v > out.m_max) {
      out.m_max = v;
      out.argmax_z = z;
    }
  }
  return out;
}

ArmInstance random_arm(Index n, Rng& rng) {
  std::uniform_int_distribution<int> kind(0, 2);
  std::normal_distribution<double> nd;
  std::bernoulli_distribution coin(0.4);
  std::uniform_int_distribution<int> small(0, 3);
  ArmInstance inst;
  inst.outcomes.resize(n);
  inst.logits.resize(n);
  const int k = kind(rng);
  for (Index i = 0; i < n; ++i) {
    switch (k) {
      case 0: inst.outcomes[i] = 2.0 * nd(rng); break;
      case 1: inst.outcomes[i] = coin(rng) ? 1.0 : 0.0; break;
      default: inst.outcomes[i] = small(rng); break;
    }
    inst.logits[i] = 1.5 * nd(rng);
  }
  inst.params = SensitivityParams::from_lambda(kInstanceLambdas[std::uniform_int_distribution<int>(0, 3)(rng)]);
  return inst;
}

ObservationalDataset random_dataset(Index n, int J, int d, Rng& rng) {
  if (n < J) fail(ErrorCode::InvalidArgument, "random dataset needs n >= J");
  std::normal_distribution<double> nd;
  std::bernoulli_distribution binary_outcome(0.3);
  MatrixXd x(n, d);
  for (Index i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = nd(rng);
  }
  MatrixXd coef(J, d + 1);
  for (int a = 0; a < J; ++a) {
    for (int j = 0; j <= d; ++j) coef(a, j) = a == 0 ? 0.0 : 0.5 * nd(rng);
  }
  VectorXi t(n);
  for (;;) {
    std::vector<int> seen(J, 0);
    for (Index i = 0; i < n; ++i) {
      VectorXd eta = coef.col(0) + coef.rightCols(d) * x.row(i).transpose();
      eta = (eta.array() - eta.maxCoeff()).exp();
      const double u = std::uniform_real_distribution<double>(0.0, eta.sum())(rng);
      double acc = 0.0;
      int a = J - 1;
      for (int k = 0; k < J - 1; ++k) {
        acc += eta[k];
        if (u < acc) {
          a = k;
          break;
        }
      }
      t[i] = a + 1;
      seen[a] = 1;
    }
    if (std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; })) break;
  }
  const bool binary = binary_outcome(rng);
  VectorXd w(d);
  for (int j = 0; j < d; ++j) w[j] = nd(rng);
  VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    const double mu = x.row(i).dot(w) + 0.5 * t[i];
    y[i] = binary ? (mu + nd(rng) > 0.0 ? 1.0 : 0.0) : mu + nd(rng);
  }
  return ObservationalDataset(std::move(t), std::move(x), std::move(y), J);
}

bool VerifyReport::ok() const noexcept {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.ok(); });
}

VerifyReport run_verification(const VerifyOptions& options, const ArmSolver& solver) {
  VerifyReport report;

  {
    CheckResult check;
    check.name = "threshold==bruteforce";
    Rng rng = make_stream(options.seed, StreamDomain::verify, 1);
    std::uniform_int_distribution<Index> size(1, options.max_brute_n);
    for (int k = 0; k < options.brute_instances; ++k) {
      const ArmInstance inst = random_arm(size(rng), rng);
      const ArmExtrema got = solver(inst.outcomes, inst.logits, inst.params);
      const ArmExtrema want = brute_force_extrema(inst.outcomes, inst.logits, inst.params);
      const bool ok = std::abs(got.m_min - want.m_min) <= 1e-9 && std::abs(got.m_max - want.m_max) <= 1e-9;
      record(check, ok,
             describe(inst) + ": solver [" + num(got.m_min) + ", " + num(got.m_max) + "], brute force [" +
                 num(want.m_min) + ", " + num(want.m_max) + "]");
    }
    report.checks.push_back(std::move(check));
  }

  {
    CheckResult check;
    check.name = "threshold==lp";
    CheckResult attain;
    attain.name = "extremal assignment attains bound";
    Rng rng = make_stream(options.seed, StreamDomain::verify, 2);
    std::uniform_int_distribution<Index> size(1, options.max_lp_n);
    for (int k = 0; k < options.lp_instances; ++k) {
      const ArmInstance inst = random_arm(size(rng), rng);
      const ArmExtrema got = solver(inst.outcomes, inst.logits, inst.params);
      ArmExtrema want;
      try {
        want = arm_extrema_lp(inst.outcomes, inst.logits, inst.params);
      } catch (const Error& e) {
        record(check, false, describe(inst) + ": " + e.what());
        continue;
      }
      const bool ok = std::abs(got.m_min - want.m_min) <= 1e-7 && std::abs(got.m_max - want.m_max) <= 1e-7;
      record(check, ok,
             describe(inst) + ": solver [" + num(got.m_min) + ", " + num(got.m_max) + "], LP [" + num(want.m_min) +
                 ", " + num(want.m_max) + "]");

      const double L = inst.params.Lambda;
      auto in_box = [&](const VectorXd& z) {
        return z.size() == inst.outcomes.size() && (z.array() >= 1.0 / L - 1e-15).all() &&
               (z.array() <= L + 1e-15).all();
      };
      bool hit = in_box(got.argmin_z) && in_box(got.argmax_z);
      if (hit) {
        hit = std::abs(sipw_estimate(inst.outcomes, inst.logits, got.argmin_z) - got.m_min) <= 1e-9 &&
              std::abs(sipw_estimate(inst.outcomes, inst.logits, got.argmax_z) - got.m_max) <= 1e-9;
      }
      record(attain, hit, describe(inst) + ": reported assignment does not reproduce [" + num(got.m_min) + ", " +
                              num(got.m_max) + "]");
    }
    report.checks.push_back(std::move(check));
    report.checks.push_back(std::move(attain));
  }

  {
    CheckResult check;
    check.name = "lambda0 collapse";
    Rng rng = make_stream(options.seed, StreamDomain::verify, 3);
    std::uniform_int_distribution<Index> size(30, 500);
    std::uniform_int_distribution<int> levels(2, 4);
    std::uniform_int_distribution<int> dims(1, 4);
    const SensitivityParams zero = SensitivityParams::from_lambda(0.0);
    for (int k = 0; k < options.collapse_datasets; ++k) {
      const Index n = size(rng);
      const int J = levels(rng);
      const ObservationalDataset data = random_dataset(n, J, dims(rng), rng);
      const GpsMatrix gps = fitted_gps(data);
      const auto arms = solve_arms(solver, data, gps, zero);
      bool ok = true;
      std::string detail = "dataset " + std::to_string(k) + " (n=" + std::to_string(n) + ", J=" + std::to_string(J) + ")";
      for (int a = 1; a <= J; ++a) {
        const ArmData ad = arm_data(data, gps, a);
        const double sipw = sipw_estimate(ad.outcomes, ad.logits, VectorXd::Ones(ad.outcomes.size()));
        const auto& e = arms[a - 1];
        if (!(e.m_max - e.m_min <= 1e-12) || std::abs(e.m_min - sipw) > 1e-12 || std::abs(e.m_max - sipw) > 1e-12) {
          ok = false;
          detail += ": arm " + std::to_string(a) + " [" + num(e.m_min) + ", " + num(e.m_max) + "] vs SIPW " + num(sipw);
          break;
        }
      }
      if (ok) {
        for (const auto& c : test_contrasts(J, rng)) {
          const ContrastResult r = contrast_interval(arms, c);
          double expect = 0.0;
          for (int a = 0; a < J; ++a) expect += c[a] * arms[a].m_min;
          if (!(r.hi - r.lo <= 1e-12) || std::abs(r.lo - expect) > 1e-12) {
            ok = false;
            detail += ": " + c.label() + " [" + num(r.lo) + ", " + num(r.hi) + "]";
            break;
          }
        }
      }
      record(check, ok, detail);
    }
    report.checks.push_back(std::move(check));
  }

  {
    CheckResult check;
    check.name = "nesting in lambda";
    Rng rng = make_stream(options.seed, StreamDomain::verify, 4);
    std::uniform_int_distribution<Index> size(30, 500);
    std::uniform_int_distribution<int> levels(2, 4);
    std::uniform_int_distribution<int> dims(1, 4);
    for (int k = 0; k < options.nesting_datasets; ++k) {
      const int J = levels(rng);
      const ObservationalDataset data = random_dataset(size(rng), J, dims(rng), rng);
      const GpsMatrix gps = fitted_gps(data);
      const auto contrasts = test_contrasts(J, rng);
      bool ok = true;
      std::string detail = "dataset " + std::to_string(k);
      std::vector<ArmExtrema> prev;
      std::vector<ContrastResult> prev_c;
      for (double lam : kNestingGrid) {
        const auto arms = solve_arms(solver, data, gps, SensitivityParams::from_lambda(lam));
        std::vector<ContrastResult> cur_c;
        for (const auto& c : contrasts) cur_c.push_back(contrast_interval(arms, c));
        if (!prev.empty()) {
          for (int a = 0; a < J && ok; ++a) {
            if (arms[a].m_min > prev[a].m_min + 1e-12 || arms[a].m_max < prev[a].m_max - 1e-12) {
              ok = false;
              detail += ": arm " + std::to_string(a + 1) + " at lambda " + num(lam) + " [" + num(arms[a].m_min) +
                        ", " + num(arms[a].m_max) + "] not containing [" + num(prev[a].m_min) + ", " +
                        num(prev[a].m_max) + "]";
            }
          }
          for (std::size_t j = 0; j < cur_c.size() && ok; ++j) {
            if (cur_c[j].lo > prev_c[j].lo + 1e-12 || cur_c[j].hi < prev_c[j].hi - 1e-12) {
              ok = false;
              detail += ": " + contrasts[j].label() + " at lambda " + num(lam) + " shrinks";
            }
          }
        }
        prev = arms;
        prev_c = std::move(cur_c);
        if (!ok) break;
      }
      record(check, ok, detail);
    }
    report.checks.push_back(std::move(check));
  }

  return report;
}

void print_report(const VerifyReport& report, std::ostream& os) {
  for (const auto& c : report.checks) {
    os << c.name << ": " << c.passed << '/' << c.total << (c.ok() ? " pass" : " FAIL") << '\n';
  }
  for (const auto& c : report.checks) {
    for (const auto& ce : c.counterexamples) os << "counterexample [" << c.name << "] " << ce << '\n';
  }
}

}  // namespace mvsens::verify
