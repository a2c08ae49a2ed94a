#include <cmath>
#include <numeric>

#include "doctest.h"
#include "ldr/calibration.hpp"
#include "ldr/numerics.hpp"

using namespace ldr;

namespace {

RiskMinResult minimize(const char* name, std::map<std::string, double> params, const RealVec& q,
                       RiskMinOptions opt = {}) {
  const Loss loss(LossSpec{name, std::move(params)});
  return minimize_conditional_risk(evaluator_for(loss), q, opt);
}

}  // namespace

TEST_CASE("conditional risk is the q-weighted loss and its gradient") {
  const Loss loss(LossSpec{"ce", {}});
  const RealVec f{0.3, -1.0, 2.0}, q{0.2, 0.5, 0.3};
  RealVec g(3);
  const double r = conditional_risk(evaluator_for(loss), f, q, g);
  double expect = 0.0;
  for (std::size_t l = 0; l < 3; ++l) expect += q[l] * loss.evaluate(f, l).value;
  CHECK(r == doctest::Approx(expect).epsilon(1e-14));
  const RealVec fd = finite_diff_grad(
      [&](std::span<const double> x) { return conditional_risk(evaluator_for(loss), x, q); }, f);
  CHECK(relative_error(g, fd) <= 1e-8);
}

TEST_CASE("LDR-KL at lambda = 1 and c = 0 recovers q through the softmax") {
  const RealVec q{0.5, 0.3, 0.2};
  const RiskMinResult r = minimize("ldr_kl", {{"lambda", 1.0}, {"c", 0.0}}, q);
  CHECK(r.converged);
  CHECK(r.restarts_agree);
  CHECK(r.grad_norm <= 1e-8);
  CHECK(std::abs(std::accumulate(r.f_star.begin(), r.f_star.end(), 0.0)) <= 1e-12);
  const RealVec p = tempered_softmax(r.f_star, 1.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-4);
}

TEST_CASE("LDR-KL at lambda = inf on the unit ball points along Kq - 1") {
  RiskMinOptions opt;
  opt.ball_radius = 1.0;
  const RiskMinResult r = minimize("ldr_kl", {{"lambda", kInfinity}, {"c", 0.0}}, {0.5, 0.3, 0.2}, opt);
  CHECK(r.converged);
  const RealVec expect{0.5 / std::sqrt(0.42), -0.1 / std::sqrt(0.42), -0.4 / std::sqrt(0.42)};
  CHECK(expect[0] == doctest::Approx(0.7715).epsilon(1e-4));
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(r.f_star[i] - expect[i]) <= 1e-5);
}

TEST_CASE("GCE with q_loss = 0.5 puts softmax mass proportional to q squared") {
  const RiskMinResult r = minimize("gce", {{"q", 0.5}}, {0.6, 0.3, 0.1});
  const RealVec p = tempered_softmax(r.f_star, 1.0);
  const RealVec expect{0.36 / 0.46, 0.09 / 0.46, 0.01 / 0.46};
  CHECK(expect[0] == doctest::Approx(0.783).epsilon(1e-3));
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(p[i] - expect[i]) <= 1e-3);
}

TEST_CASE("MSE optimum") {
  CHECK(mse_optimum_oracle(RealVec{0.5, 0.5}) == RealVec{0.5, 0.5});
  const RealVec q{0.7, 0.2, 0.1};
  CHECK(mse_optimum_oracle(q) == q);
  const RealVec p = tempered_softmax(minimize("mse", {}, q).f_star, 1.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-4);
}

TEST_CASE("SCE optimum satisfies the affine reciprocal relation") {
  const SceCheck pure_ce = sce_optimum_check(RealVec{0.6, 0.3, 0.1}, 1.0, -4.0);
  CHECK(pure_ce.applicable);
  CHECK(pure_ce.holds);
  const SceCheck mixed = sce_optimum_check(RealVec{0.6, 0.3, 0.1}, 0.5, -4.0);
  CHECK(mixed.holds);
  CHECK(mixed.residual <= 1e-3);
  CHECK_FALSE(sce_optimum_check(RealVec{1.0, 0.0, 0.0}, 0.5, -4.0).applicable);
}

TEST_CASE("rank_preserving") {
  CHECK(rank_preserving(RealVec{1, 2, 3}, RealVec{0.1, 0.3, 0.6}));
  CHECK_FALSE(rank_preserving(RealVec{3, 2, 1}, RealVec{0.1, 0.3, 0.6}));
  CHECK(rank_preserving(RealVec{5, -1, 2}, RealVec{1.0 / 3, 1.0 / 3, 1.0 / 3}));
  CHECK(rank_preserving(RealVec{1, 1, 3}, RealVec{0.2, 0.2 + 1e-7, 0.6 - 1e-7}));
}

TEST_CASE("MAE minimizer puts its top coordinate on argmax q") {
  RiskMinOptions opt;
  opt.max_iters = 2000;
  const RealVec q{0.15, 0.45, 0.25, 0.15};
  const RiskMinResult r = minimize("mae", {}, q, opt);
  CHECK(argmax_lowest(r.f_star) == 1);
}

TEST_CASE("non-convergence is reported") {
  RiskMinOptions opt;
  opt.max_iters = 3;
  opt.restarts = 1;
  const RiskMinResult r = minimize("ldr_kl", {{"lambda", 1.0}, {"c", 0.1}}, {0.5, 0.3, 0.2}, opt);
  CHECK_FALSE(r.converged);
  CHECK(r.grad_norm > opt.tol);
}

TEST_CASE("input validation") {
  const Loss loss(LossSpec{"ce", {}});
  CHECK_THROWS_AS(minimize_conditional_risk(evaluator_for(loss), RealVec{0.5, 0.6}), DomainError);
  CHECK_THROWS_AS(minimize_conditional_risk(evaluator_for(loss), RealVec{1.5, -0.5}), DomainError);
  RiskMinOptions opt;
  opt.ball_radius = 0.0;
  CHECK_THROWS_AS(minimize_conditional_risk(evaluator_for(loss), RealVec{0.5, 0.5}, opt), DomainError);
}

TEST_CASE("suite passes at small scale and renders CSV") {
  const auto rows = run_calibration_suite(10, 3);
  CHECK(rows.size() == 13);
  for (const auto& row : rows) {
    INFO(row.claim);
    CHECK(row.passed);
  }
  const std::string csv = calibration_csv(rows);
  CHECK(csv.rfind("schema_version,claim,passed,checked,failed,inconclusive,worst\n", 0) == 0);
}
