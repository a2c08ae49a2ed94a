#include <cmath>
#include <random>

#include "doctest.h"
#include "ldr/loss_registry.hpp"
#include "ldr/numerics.hpp"
#include "unit/test_support.hpp"

using namespace ldr;

TEST_CASE("every registered name constructs with defaults") {
  const auto names = registered_loss_names();
  CHECK(names.size() == 19);
  const RealVec f{0.4, -1.2, 0.9, 0.1};
  for (const auto& name : names) {
    INFO(name);
    const Loss loss(LossSpec{name, {}});
    const LossGrad r = loss.evaluate(f, 2);
    CHECK(std::isfinite(r.value));
    CHECK(r.grad.size() == f.size());
  }
}

TEST_CASE("configuration errors") {
  CHECK_THROWS_AS(Loss(LossSpec{"hinge", {}}), ConfigError);
  CHECK_THROWS_AS(Loss(LossSpec{"ldr_kl", {{"lambda0", 1.0}}}), ConfigError);
  CHECK_THROWS_AS(Loss(LossSpec{"ldr_kl", {{"lambda", -1.0}}}), ConfigError);
  CHECK_THROWS_AS(Loss(LossSpec{"aldr_kl", {{"lambda0", 0.0}}}), ConfigError);
  CHECK_THROWS_AS(Loss(LossSpec{"aldr_kl", {{"alpha", -2.0}}}), ConfigError);
  CHECK_THROWS_AS(Loss(LossSpec{"ldr_k_kl", {{"k", 1.5}}}), ConfigError);
  CHECK_THROWS_AS(Loss(LossSpec{"gce", {{"c", 1.0}}}), ConfigError);
  CHECK_THROWS_AS(Loss(LossSpec{"ce", {{"x", std::nan("")}}}), ConfigError);
  const Loss too_big(LossSpec{"ldr_k_kl", {{"k", 5.0}}});
  CHECK_THROWS_AS(too_big.evaluate(RealVec{1.0, 2.0, 3.0}, 0), ConfigError);
}

TEST_CASE("dispatch matches the underlying functions") {
  const RealVec f{1.0, 0.2, -0.7};
  const Loss kl(LossSpec{"ldr_kl", {{"lambda", 2.0}, {"c", 0.3}}});
  CHECK(kl.evaluate(f, 1).value == ldr_kl(f, 1, LdrKlParams{2.0, Margin{0.3}}).value);
  const Loss defaults(LossSpec{"ldr_kl", {}});
  CHECK(defaults.evaluate(f, 1).value == ldr_kl(f, 1, LdrKlParams{1.0, Margin{0.1}}).value);
  const Loss kk(LossSpec{"ldr_k_kl", {{"lambda", 0.5}, {"k", 2.0}}});
  CHECK(kk.evaluate(f, 0).value == ldr_k_kl(f, 0, Margin{0.1}, 0.5, OmegaK{2}).value);
}

TEST_CASE("normalization and adaptivity flags") {
  CHECK(Loss(LossSpec{"ldr_kl", {}}).uses_normalized_logits());
  CHECK(Loss(LossSpec{"aldr_kl", {}}).uses_normalized_logits());
  CHECK(Loss(LossSpec{"ldr_k_kl", {}}).uses_normalized_logits());
  CHECK_FALSE(Loss(LossSpec{"ce", {}}).uses_normalized_logits());
  CHECK(Loss(LossSpec{"aldr_kl", {}}).is_adaptive());
  CHECK_FALSE(Loss(LossSpec{"ldr_kl", {}}).is_adaptive());
}

TEST_CASE("aldr alpha defaults to 2 log K / lambda0") {
  const Loss aldr(LossSpec{"aldr_kl", {{"lambda0", 10.0}}});
  CHECK(aldr.aldr_params(5).alpha == doctest::Approx(2.0 * std::log(5.0) / 10.0));
  const Loss fixed(LossSpec{"aldr_kl", {{"lambda0", 10.0}, {"alpha", 0.05}}});
  CHECK(fixed.aldr_params(5).alpha == 0.05);
}

TEST_CASE("aldr adaptive_step advances lambda and matches aldr_kl_step") {
  const Loss aldr(LossSpec{"aldr_kl", {{"lambda0", 2.0}}});
  const RealVec f{0.3, 1.1, -0.4};
  double lambda = 2.0;
  const AldrStepResult expect = aldr_kl_step(f, 1, 2.0, aldr.aldr_params(3));
  const LossGrad r = aldr.adaptive_step(f, 1, lambda);
  CHECK(lambda == expect.lambda_next);
  CHECK(r.value == expect.value);
  CHECK(lambda >= 1.0);
  CHECK(lambda <= 2.0);
}

TEST_CASE("aldr exact evaluation has a Danskin gradient") {
  std::mt19937_64 rng(5);
  const Loss aldr(LossSpec{"aldr_kl", {{"lambda0", 1.0}, {"alpha", 0.5}}});
  for (int t = 0; t < 50; ++t) {
    const std::size_t K = 2 + test::random_index(rng, 8);
    const RealVec f = test::random_scores(rng, K);
    const std::size_t y = test::random_index(rng, K);
    const LossGrad r = aldr.evaluate(f, y);
    const RealVec fd = finite_diff_grad([&](std::span<const double> x) { return aldr.evaluate(x, y).value; }, f);
    CHECK(relative_error(r.grad, fd) <= 1e-5);
  }
}
