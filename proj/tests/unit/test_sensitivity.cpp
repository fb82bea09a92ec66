#include "mvsens/error.hpp"
#include "mvsens/log.hpp"
#include "mvsens/lp.hpp"
#include "mvsens/sensitivity.hpp"
#include "mvsens/verify.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <random>

using namespace mvsens;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("sipw hand example") {
  CHECK(sipw_estimate(vec({0, 1, 1}), vec({0, 0, 0}), vec({2, 0.5, 0.5})) == doctest::Approx(0.5).epsilon(1e-15));
  // z = 1: weights 1 + e^-g = 1 / r
  const VectorXd g = vec({0.3, -1.2, 2.0});
  const VectorXd y = vec({1.0, 4.0, -2.0});
  const VectorXd r = (1.0 / (1.0 + (-g.array()).exp())).matrix();
  const double ipw = (y.array() / r.array()).sum() / (1.0 / r.array()).sum();
  CHECK(sipw_estimate(y, g, VectorXd::Ones(3)) == doctest::Approx(ipw).epsilon(1e-14));
  CHECK(sipw_estimate(VectorXd::Constant(4, 3.25), vec({1, -2, 0.5, 4}), vec({0.2, 5, 1, 3})) ==
        doctest::Approx(3.25).epsilon(1e-15));
  CHECK_THROWS_AS(sipw_estimate(VectorXd(0), VectorXd(0), VectorXd(0)), Error);
  try {
    sipw_estimate(vec({1, 2}), vec({0}), vec({1, 1}));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LengthMismatch);
  }
}

TEST_CASE("sensitivity parameters") {
  CHECK(SensitivityParams::from_lambda(0.0).Lambda == 1.0);
  CHECK(SensitivityParams::from_lambda(1.0).Lambda == doctest::Approx(std::exp(1.0)));
  CHECK(SensitivityParams::from_Lambda(2.0).lambda == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(SensitivityParams::from_lambda(-0.1), Error);
  CHECK_THROWS_AS(SensitivityParams::from_lambda(std::nan("")), Error);
  CHECK_THROWS_AS(SensitivityParams::from_Lambda(0.5), Error);
}

TEST_CASE("LP hand example") {
  const auto p = SensitivityParams::from_Lambda(2.0);
  for (const auto& e : {arm_extrema_lp(vec({0, 1}), vec({0, 0}), p), arm_extrema_threshold(vec({0, 1}), vec({0, 0}), p)}) {
    CHECK(e.m_max == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(e.m_min == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(e.argmax_z.isApprox(vec({0.5, 2.0})));
    CHECK(e.argmin_z.isApprox(vec({2.0, 0.5})));
  }
}

TEST_CASE("generic LP solver") {
  // maximize 3x + 2y  s.t.  x + y <= 4, x + 3y <= 6, x <= 3
  lp::LinearProgram p;
  p.objective = vec({3, 2});
  p.A_ub.resize(3, 2);
  p.A_ub << 1, 1, 1, 3, 1, 0;
  p.b_ub = vec({4, 6, 3});
  auto s = lp::solve(p);
  REQUIRE(s.status == lp::Status::optimal);
  CHECK(s.objective == doctest::Approx(11.0));
  CHECK(s.x.isApprox(vec({3, 1})));
  // equality plus infeasible bound
  p.A_eq.resize(1, 2);
  p.A_eq << 1, 1;
  p.b_eq = vec({5});
  CHECK(lp::solve(p).status == lp::Status::infeasible);
  // unbounded
  lp::LinearProgram u;
  u.objective = vec({1, 0});
  u.A_ub.resize(1, 2);
  u.A_ub << 0, 1;
  u.b_ub = vec({1});
  CHECK(lp::solve(u).status == lp::Status::unbounded);
  // negative right-hand side: x >= 2 written as -x <= -2, minimize x
  lp::LinearProgram q;
  q.objective = vec({-1});
  q.A_ub.resize(1, 1);
  q.A_ub << -1;
  q.b_ub = vec({-2});
  s = lp::solve(q);
  REQUIRE(s.status == lp::Status::optimal);
  CHECK(s.x[0] == doctest::Approx(2.0));
}

TEST_CASE("degenerate cases") {
  const auto lam = SensitivityParams::from_lambda(1.3);
  const auto single = arm_extrema_threshold(vec({4.5}), vec({-0.7}), lam);
  CHECK(single.m_min == 4.5);
  CHECK(single.m_max == 4.5);
  const VectorXd y = vec({1, 3, 2, 2, 5});
  const VectorXd g = vec({0.1, -0.4, 1.2, 0.0, -2.0});
  const auto zero = arm_extrema_threshold(y, g, SensitivityParams::from_lambda(0.0));
  const double sipw = sipw_estimate(y, g, VectorXd::Ones(5));
  CHECK(std::abs(zero.m_min - sipw) <= 1e-12);
  CHECK(std::abs(zero.m_max - sipw) <= 1e-12);
  CHECK(std::abs(zero.point - sipw) <= 1e-14);
  const auto lp0 = arm_extrema_lp(y, g, SensitivityParams::from_lambda(0.0));
  CHECK(std::abs(lp0.m_min - sipw) <= 1e-12);
  CHECK(std::abs(lp0.m_max - sipw) <= 1e-12);
  CHECK_THROWS_AS(arm_extrema_threshold(VectorXd(0), VectorXd(0), lam), Error);
}

TEST_CASE("threshold equals vertex brute force") {
  Rng rng = make_stream(21, StreamDomain::verify, 200);
  std::uniform_int_distribution<Index> size(1, 12);
  for (int k = 0; k < 100; ++k) {
    const auto inst = verify::random_arm(size(rng), rng);
    const auto got = arm_extrema_threshold(inst.outcomes, inst.logits, inst.params);
    const auto want = oracle::vertex_range(inst.outcomes, inst.logits, inst.params.Lambda);
    REQUIRE(std::abs(got.m_min - want.lo) <= 1e-9);
    REQUIRE(std::abs(got.m_max - want.hi) <= 1e-9);
  }
}

TEST_CASE("threshold equals Charnes-Cooper LP") {
  Rng rng = make_stream(22, StreamDomain::verify, 201);
  std::uniform_int_distribution<Index> size(1, 200);
  for (int k = 0; k < 200; ++k) {
    const auto inst = verify::random_arm(size(rng), rng);
    const auto got = arm_extrema_threshold(inst.outcomes, inst.logits, inst.params);
    const auto want = arm_extrema_lp(inst.outcomes, inst.logits, inst.params);
    REQUIRE(std::abs(got.m_min - want.m_min) <= 1e-7);
    REQUIRE(std::abs(got.m_max - want.m_max) <= 1e-7);
    // The LP's z attains its own optimum too.
    CHECK(std::abs(sipw_estimate(inst.outcomes, inst.logits, want.argmax_z) - want.m_max) <= 1e-7);
  }
}

TEST_CASE("range containment, nesting and attained assignments") {
  Rng rng = make_stream(23, StreamDomain::verify, 202);
  std::uniform_int_distribution<Index> size(1, 150);
  for (int k = 0; k < 200; ++k) {
    auto inst = verify::random_arm(size(rng), rng);
    const ArmSweep sweep(inst.outcomes, inst.logits);
    ArmExtrema prev;
    bool first = true;
    for (double lam : {0.0, 0.1, 0.5, 1.0, 2.0, 5.0}) {
      const auto p = SensitivityParams::from_lambda(lam);
      const auto e = sweep.solve(p);
      CHECK(e.m_min >= inst.outcomes.minCoeff() - 1e-12);
      CHECK(e.m_max <= inst.outcomes.maxCoeff() + 1e-12);
      CHECK(e.m_min <= e.point + 1e-12);
      CHECK(e.m_max >= e.point - 1e-12);
      CHECK(std::abs(sipw_estimate(inst.outcomes, inst.logits, e.argmin_z) - e.m_min) <= 1e-12);
      CHECK(std::abs(sipw_estimate(inst.outcomes, inst.logits, e.argmax_z) - e.m_max) <= 1e-12);
      CHECK((e.argmax_z.array() >= 1.0 / p.Lambda).all());
      CHECK((e.argmax_z.array() <= p.Lambda).all());
      if (!first) {
        CHECK(e.m_min <= prev.m_min + 1e-12);
        CHECK(e.m_max >= prev.m_max - 1e-12);
      }
      prev = e;
      first = false;
    }
    const auto only_max = sweep.solve(SensitivityParams::from_lambda(1.0), Direction::max, false);
    CHECK(std::isnan(only_max.m_min));
    CHECK(only_max.m_max == sweep.solve(SensitivityParams::from_lambda(1.0)).m_max);
  }
}

TEST_CASE("ties keep a valid assignment") {
  const VectorXd y = vec({1, 1, 1, 0, 0, 2, 2});
  const VectorXd g = vec({0.5, -0.5, 0.0, 1.0, -1.0, 0.2, 0.3});
  const auto p = SensitivityParams::from_lambda(0.7);
  const auto e = arm_extrema_threshold(y, g, p);
  const auto want = oracle::vertex_range(y, g, p.Lambda);
  CHECK(std::abs(e.m_min - want.lo) <= 1e-12);
  CHECK(std::abs(e.m_max - want.hi) <= 1e-12);
}

TEST_CASE("shifted GPS reproduces the weights") {
  Rng rng = make_stream(24, StreamDomain::verify, 203);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> uz(1.0 / 3.0, 3.0);
  VectorXd g(50), z(50);
  for (Index i = 0; i < 50; ++i) {
    g[i] = 2.0 * nd(rng);
    z[i] = uz(rng);
  }
  const VectorXd r = shifted_gps(z, g);
  const VectorXd w = (1.0 + z.array() * (-g.array()).exp()).matrix();
  CHECK((r.cwiseInverse() - w).cwiseAbs().maxCoeff() <= 1e-12 * w.cwiseAbs().maxCoeff());
  // z = exp(h): odds ratio between observed and shifted GPS equals z.
  const VectorXd r0 = (1.0 / (1.0 + (-g.array()).exp())).matrix();
  for (Index i = 0; i < 50; ++i) {
    const double ratio = (r0[i] / (1 - r0[i])) / (r[i] / (1 - r[i]));
    CHECK(ratio == doctest::Approx(z[i]).epsilon(1e-9));
  }
}

TEST_CASE("extreme logits are clamped with a warning") {
  std::vector<std::string> seen;
  auto prev = set_warning_sink([&](std::string_view m) { seen.emplace_back(m); });
  const VectorXd b = inverse_odds(vec({40.0, -40.0, 0.0}));
  set_warning_sink(prev);
  CHECK(b[0] == kMinInverseOdds);
  CHECK(b[1] == kMaxInverseOdds);
  CHECK(b[2] == 1.0);
  REQUIRE(seen.size() == 1);
  CHECK(seen[0].find("2 unit") != std::string::npos);
}
