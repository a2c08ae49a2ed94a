#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "ldr/topk_dro.hpp"
#include "unit/test_support.hpp"

using namespace ldr;

namespace {

struct Instance {
  RealVec q;
  double lambda;
  OmegaK omega;
};

Instance random_instance(std::mt19937_64& rng, std::size_t max_K) {
  Instance inst;
  const std::size_t K = 2 + test::random_index(rng, max_K - 1);
  inst.q = test::random_scores(rng, K, 1.0);
  inst.lambda = std::exp(std::uniform_real_distribution<double>(std::log(0.05), std::log(20.0))(rng));
  inst.omega = OmegaK{1 + test::random_index(rng, K)};
  return inst;
}

void check_feasible(std::span<const double> p, OmegaK omega) {
  const double cap = 1.0 / static_cast<double>(omega.k);
  double total = 0.0;
  for (double v : p) {
    CHECK(v >= 0.0);
    CHECK(v <= cap + 1e-12);
    total += v;
  }
  CHECK(total <= 1.0 + 1e-12);
}

}  // namespace

TEST_CASE("omega_k_argmax closed-form examples") {
  SUBCASE("flat scores, k = 1: interior point 1/(3e)") {
    const auto r = omega_k_argmax(RealVec{0, 0, 0}, 1.0, OmegaK{1});
    for (double v : r.p) CHECK(std::abs(v - 0.12262648039048077387) <= 1e-15);
    CHECK(r.a == 1);
    const auto oracle = omega_k_oracle(RealVec{0, 0, 0}, 1.0, OmegaK{1});
    for (double v : oracle) CHECK(std::abs(v - 0.12262648039048077387) <= 1e-6);
  }
  SUBCASE("flat scores above lambda clamp to 1/K when k = K") {
    const auto r = omega_k_argmax(RealVec(4, 5.0), 1.0, OmegaK{4});
    for (double v : r.p) CHECK(v == doctest::Approx(0.25));
    const auto oracle = omega_k_oracle(RealVec(4, 5.0), 1.0, OmegaK{4});
    for (double v : oracle) CHECK(std::abs(v - 0.25) <= 1e-6);
  }
  SUBCASE("one dominant score is capped at 1/k") {
    const RealVec q{10.0, 0.0, 0.0};
    const auto r = omega_k_argmax(q, 0.5, OmegaK{2});
    CHECK(r.a == 2);
    CHECK(r.p[0] == doctest::Approx(0.5));
    // Remaining coordinates are free: exp(0/0.5 - 1)/3.
    CHECK(std::abs(r.p[1] - std::exp(-1.0) / 3.0) <= 1e-15);
    CHECK(std::abs(r.p[2] - std::exp(-1.0) / 3.0) <= 1e-15);
    const auto oracle = omega_k_oracle(q, 0.5, OmegaK{2});
    CHECK(std::abs(omega_k_objective(q, oracle, 0.5) - r.objective) <= 1e-6);
  }
  SUBCASE("k = K with q = 0 reproduces the interior 1/(Ke) solution") {
    const auto oracle = omega_k_oracle(RealVec(6, 0.0), 1.0, OmegaK{6});
    for (double v : oracle) CHECK(std::abs(v - std::exp(-1.0) / 6.0) <= 1e-6);
  }
}

TEST_CASE("omega_k_argmax rejects bad input") {
  CHECK_THROWS_AS(omega_k_argmax(RealVec{0, 1}, 0.0, OmegaK{1}), DomainError);
  CHECK_THROWS_AS(omega_k_argmax(RealVec{0, 1}, 1.0, OmegaK{3}), DomainError);
  CHECK_THROWS_AS(omega_k_argmax(RealVec{0, 1}, 1.0, OmegaK{0}), DomainError);
}

TEST_CASE("oracle iterates never increase the dual objective") {
  const RealVec q{1.0, -0.5, 0.3, 2.0};
  const auto run = omega_k_oracle_run(q, 0.2, OmegaK{2});
  for (std::size_t i = 1; i < run.objective_trace.size(); ++i) {
    CHECK(run.objective_trace[i] <= run.objective_trace[i - 1]);
  }
  // Strong duality: lambda * D* equals the primal optimum.
  CHECK(0.2 * run.objective_trace.back() == doctest::Approx(omega_k_argmax(q, 0.2, OmegaK{2}).objective).epsilon(1e-10));
}

TEST_CASE("project_omega_k") {
  const auto p = project_omega_k(RealVec{0.9, 0.8, -0.3}, OmegaK{2});
  check_feasible(p, OmegaK{2});
  CHECK(p[2] == 0.0);
  CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));
  const auto inside = project_omega_k(RealVec{0.1, 0.2, 0.3}, OmegaK{2});
  CHECK(inside == RealVec{0.1, 0.2, 0.3});
}

TEST_CASE("solver agrees with the projected-gradient oracle") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    const Instance inst = random_instance(rng, 50);
    const auto exact = omega_k_argmax(inst.q, inst.lambda, inst.omega);
    const auto oracle = omega_k_oracle(inst.q, inst.lambda, inst.omega);
    check_feasible(exact.p, inst.omega);
    CHECK(exact.objective >= omega_k_objective(inst.q, oracle, inst.lambda) - 1e-8);
    CHECK(std::abs(exact.objective - omega_k_objective(inst.q, oracle, inst.lambda)) <= 1e-8);
    for (std::size_t i = 0; i < inst.q.size(); ++i) CHECK(std::abs(exact.p[i] - oracle[i]) <= 1e-6);
  }
}

TEST_CASE("KKT certificate: clamped coordinates have the largest scores") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    const Instance inst = random_instance(rng, 40);
    const auto r = omega_k_argmax(inst.q, inst.lambda, inst.omega);
    const double cap = 1.0 / static_cast<double>(inst.omega.k);
    double min_clamped = kInfinity, max_free = -kInfinity;
    std::size_t clamped = 0;
    for (std::size_t i = 0; i < inst.q.size(); ++i) {
      CHECK(r.p[i] <= cap * (1.0 + 1e-12));
      if (r.p[i] >= cap * (1.0 - 1e-12)) {
        ++clamped;
        min_clamped = std::min(min_clamped, inst.q[i]);
      } else {
        max_free = std::max(max_free, inst.q[i]);
      }
    }
    CHECK(clamped + 1 >= r.a);
    if (clamped > 0) CHECK(min_clamped >= max_free);
  }
}

TEST_CASE("permutation equivariance") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t K = 3 + test::random_index(rng, 20);
    const RealVec f = test::random_scores(rng, K);
    const std::size_t y = test::random_index(rng, K);
    std::vector<std::size_t> perm(K);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    RealVec fp(K);
    for (std::size_t i = 0; i < K; ++i) fp[perm[i]] = f[i];
    const OmegaK omega{1 + test::random_index(rng, K)};
    const auto a = ldr_k_kl(f, y, Margin{0.1}, 0.7, omega);
    const auto b = ldr_k_kl(fp, perm[y], Margin{0.1}, 0.7, omega);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
    for (std::size_t i = 0; i < K; ++i) CHECK(std::abs(a.grad[i] - b.grad[perm[i]]) <= 1e-12);
  }
}

TEST_CASE("ldr_k_kl gradient matches finite differences") {
  std::mt19937_64 rng(55);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t K = 2 + test::random_index(rng, 29);
    const RealVec f = test::random_scores(rng, K);
    const std::size_t y = test::random_index(rng, K);
    const double lambda = std::exp(std::uniform_real_distribution<double>(std::log(0.05), std::log(20.0))(rng));
    const OmegaK omega{1 + test::random_index(rng, K)};
    const Margin m{0.1};
    const auto analytic = ldr_k_kl(f, y, m, lambda, omega);
    const auto numeric =
        finite_diff_grad([&](std::span<const double> x) { return ldr_k_kl(x, y, m, lambda, omega).value; }, f);
    worst = std::max(worst, relative_error(analytic.grad, numeric));
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("ldr_k_kl with k = 1 and an inactive cap is the simplex-constrained LDR-KL") {
  // When the sum constraint binds and no cap does, the maximizer is the softmax of u / lambda and
  // the value equals the LDR-KL value (both use the mean-normalized log-sum-exp).
  std::mt19937_64 rng(66);
  int compared = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t K = 2 + test::random_index(rng, 10);
    const RealVec f = test::random_scores(rng, K, 0.5);
    const std::size_t y = test::random_index(rng, K);
    const double lambda = 0.3;
    const auto r = ldr_k_kl(f, y, Margin{0.1}, lambda, OmegaK{1});
    const RealVec u = shifted_scores(f, y, Margin{0.1});
    const auto proj = omega_k_argmax(u, lambda, OmegaK{1});
    const double total = std::accumulate(proj.p.begin(), proj.p.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12) continue;  // sum constraint not binding
    ++compared;
    CHECK(r.value == doctest::Approx(ldr_kl(f, y, LdrKlParams{lambda, Margin{0.1}}).value).epsilon(1e-12));
  }
  CHECK(compared > 50);
}

TEST_CASE("ldr_k_kl with a dominant label sits at the regularized floor") {
  const RealVec f{50.0, 0.0, 0.0, 0.0};
  const double lambda = 0.5;
  const auto r = ldr_k_kl(f, 0, Margin{0.1}, lambda, OmegaK{2});
  const RealVec u = shifted_scores(f, 0, Margin{0.1});
  const auto oracle = omega_k_oracle(u, lambda, OmegaK{2});
  CHECK(std::abs(r.value - omega_k_objective(u, oracle, lambda)) <= 1e-8);
  const auto proj = omega_k_argmax(u, lambda, OmegaK{2});
  CHECK(proj.a == 1);
  for (double v : proj.p) CHECK(v < 0.5);
  // Only the label's own coordinate carries mass, so the value is -lambda p log(K p) at p = e^-1/K.
  CHECK(r.value == doctest::Approx(lambda * std::exp(-1.0) / 4.0).epsilon(1e-9));
}

TEST_CASE("topk_svm") {
  auto r = topk_svm(RealVec{1, 3, 2}, 0, Margin{0.0}, OmegaK{2});
  CHECK(r.value == doctest::Approx(1.5));
  CHECK(r.grad[0] == doctest::Approx(-1.0));
  CHECK(r.grad[1] == doctest::Approx(0.5));
  CHECK(r.grad[2] == doctest::Approx(0.5));

  r = topk_svm(RealVec{5, 1, 2}, 0, Margin{0.0}, OmegaK{2});
  CHECK(r.value == 0.0);
  for (double g : r.grad) CHECK(g == 0.0);

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t K = 2 + test::random_index(rng, 20);
    const RealVec f = test::random_scores(rng, K);
    const std::size_t y = test::random_index(rng, K);
    CHECK(topk_svm(f, y, Margin{0.1}, OmegaK{1}).value == ldr_kl(f, y, LdrKlParams{0.0, Margin{0.1}}).value);
  }
}

TEST_CASE("ldr_k_kl approaches topk_svm as lambda -> 0") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t K = 2 + test::random_index(rng, 20);
    const RealVec f = test::random_scores(rng, K);
    const std::size_t y = test::random_index(rng, K);
    const OmegaK omega{1 + test::random_index(rng, K)};
    for (double lambda : {1e-2, 1e-3}) {
      const double smooth = ldr_k_kl(f, y, Margin{0.1}, lambda, omega).value;
      const double hinge = topk_svm(f, y, Margin{0.1}, omega).value;
      CHECK(std::abs(smooth - hinge) <= lambda * std::log(static_cast<double>(K)) + lambda);
    }
  }
}
