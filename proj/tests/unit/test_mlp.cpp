#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "ldr/errors.hpp"
#include "ldr/loss_registry.hpp"
#include "ldr/mlp.hpp"
#include "test_support.hpp"

using namespace ldr;

namespace {

// L(g) = v . g for a fixed v, so dL/dg = v.
double linear_objective(const Mlp& model, std::span<const double> x, std::span<const double> v, bool normalize) {
  ForwardCache cache;
  forward(model, x, normalize, cache);
  double s = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) s += v[k] * cache.normalized[k];
  return s;
}

RealVec param_grad(const Mlp& model, std::span<const double> x, std::span<const double> dL_dg, bool normalize) {
  ForwardCache cache;
  forward(model, x, normalize, cache);
  RealVec grad(model.size(), 0.0);
  backward(model, x, cache, dL_dg, grad);
  return grad;
}

}  // namespace

TEST_CASE("forward pass by hand") {
  Mlp m(2, 2, 2);
  // W1 = [[1, 0], [0, -1]], b1 = (0, 0.5), W2 = [[1, 1], [2, 0]], b2 = (0, -1)
  m.params() = {1, 0, 0, -1, 0, 0.5, 1, 1, 2, 0, 0, -1};
  const RealVec x{1.0, 2.0};
  ForwardCache c;
  forward(m, x, false, c);
  CHECK(c.hidden == RealVec{1.0, 0.0});  // second unit: -2 + 0.5 < 0
  CHECK(c.logits == RealVec{1.0, 1.0});
  CHECK(c.normalized == c.logits);
  CHECK_FALSE(c.scaled);

  forward(m, x, true, c);
  CHECK(c.l1 == doctest::Approx(2.0));
  CHECK(c.normalized[0] == doctest::Approx(1.0));  // K f / ||f||_1 = 2 * 1 / 2
  CHECK(c.scaled);
}

TEST_CASE("normalized logits have L1 norm K") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const std::size_t K = 2 + test::random_index(rng, 9);
    const RealVec f = test::random_scores(rng, K);
    RealVec g(K);
    double l1 = 0.0;
    REQUIRE(normalize_logits(f, g, l1));
    double norm = 0.0;
    for (double v : g) norm += std::abs(v);
    CHECK(norm == doctest::Approx(static_cast<double>(K)));
  }
  SUBCASE("near-zero logits pass through") {
    const RealVec f{1e-10, -1e-10, 0.0};
    RealVec g(3);
    double l1 = 0.0;
    CHECK_FALSE(normalize_logits(f, g, l1));
    CHECK(g == f);
  }
}

TEST_CASE("parameter gradients match finite differences") {
  std::mt19937_64 rng(11);
  for (bool normalize : {true, false}) {
    CAPTURE(normalize);
    for (int t = 0; t < 30; ++t) {
      const Mlp model = Mlp::kaiming(3, 3, 4, rng());
      Mlp shifted = model;
      // Nonzero biases keep ReLU units away from their kink at the evaluation point most of the time.
      for (std::size_t i = model.b1(); i < model.w2(); ++i) shifted.params()[i] = 0.3;
      const RealVec x = test::random_scores(rng, 3, 1.0);
      const RealVec v = test::random_scores(rng, 4, 1.0);
      ForwardCache probe_cache;
      forward(shifted, x, true, probe_cache);
      if (probe_cache.l1 < 1e-2) continue;  // normalization switches off near f = 0
      const RealVec analytic = param_grad(shifted, x, v, normalize);
      const RealVec numeric = finite_diff_grad(
          [&](std::span<const double> w) {
            Mlp probe = shifted;
            std::copy(w.begin(), w.end(), probe.params().begin());
            return linear_objective(probe, x, v, normalize);
          },
          shifted.params(), 1e-6);
      CHECK(relative_error(analytic, numeric) <= 1e-4);
    }
  }
}

TEST_CASE("end-to-end gradient through a registered loss") {
  std::mt19937_64 rng(13);
  const Loss loss(LossSpec{"ldr_kl", {{"lambda", 1.0}}});
  for (int t = 0; t < 20; ++t) {
    Mlp model = Mlp::kaiming(3, 3, 4, rng());
    for (std::size_t i = model.b1(); i < model.w2(); ++i) model.params()[i] = 0.2;
    const RealVec x = test::random_scores(rng, 3, 1.0);
    const std::size_t y = test::random_index(rng, 4);
    ForwardCache cache;
    forward(model, x, true, cache);
    if (cache.l1 < 1e-2) continue;
    const LossGrad lg = loss.evaluate(cache.normalized, y);
    RealVec analytic(model.size(), 0.0);
    backward(model, x, cache, lg.grad, analytic);
    const RealVec numeric = finite_diff_grad(
        [&](std::span<const double> w) {
          Mlp probe = model;
          std::copy(w.begin(), w.end(), probe.params().begin());
          ForwardCache c;
          forward(probe, x, true, c);
          return loss.evaluate(c.normalized, y).value;
        },
        model.params(), 1e-6);
    CHECK(relative_error(analytic, numeric) <= 1e-4);
  }
}

TEST_CASE("backward edge cases") {
  std::mt19937_64 rng(17);
  const Mlp model = Mlp::kaiming(4, 5, 3, 1);
  const RealVec x = test::random_scores(rng, 4);

  SUBCASE("zero score gradient gives zero parameter gradient") {
    const RealVec g = param_grad(model, x, RealVec(3, 0.0), true);
    for (double v : g) CHECK(v == 0.0);
  }
  SUBCASE("backward accumulates") {
    const RealVec v{0.5, -1.0, 2.0};
    ForwardCache cache;
    forward(model, x, false, cache);
    RealVec grad(model.size(), 0.0);
    backward(model, x, cache, v, grad);
    const RealVec once = grad;
    backward(model, x, cache, v, grad);
    for (std::size_t i = 0; i < grad.size(); ++i) CHECK(grad[i] == doctest::Approx(2.0 * once[i]));
  }
  SUBCASE("all-zero model stays finite under normalization") {
    const Mlp zero(4, 5, 3);
    ForwardCache cache;
    forward(zero, x, true, cache);
    CHECK_FALSE(cache.scaled);
    const RealVec g = param_grad(zero, x, RealVec{1.0, -1.0, 0.5}, true);
    for (double v : g) CHECK(std::isfinite(v));
  }
  SUBCASE("normalized logits are invariant to scaling the last layer") {
    Mlp scaled = model;
    for (std::size_t i = model.w2(); i < model.size(); ++i) scaled.params()[i] *= 3.5;
    ForwardCache a, b;
    forward(model, x, true, a);
    forward(scaled, x, true, b);
    for (std::size_t k = 0; k < 3; ++k) CHECK(a.normalized[k] == doctest::Approx(b.normalized[k]));
  }
}

TEST_CASE("kaiming initialization") {
  const Mlp m = Mlp::kaiming(10, 0, 4, 3);
  CHECK(m.h() == 4);
  const double bound1 = std::sqrt(6.0 / 10.0), bound2 = std::sqrt(6.0 / 4.0);
  for (std::size_t i = m.w1(); i < m.b1(); ++i) CHECK(std::abs(m.params()[i]) <= bound1);
  for (std::size_t i = m.b1(); i < m.w2(); ++i) CHECK(m.params()[i] == 0.0);
  for (std::size_t i = m.w2(); i < m.b2(); ++i) CHECK(std::abs(m.params()[i]) <= bound2);
  CHECK(Mlp::kaiming(10, 0, 4, 3).params() == m.params());
  CHECK(Mlp::kaiming(10, 0, 4, 4).params() != m.params());
}

TEST_CASE("checkpoint round trip") {
  const auto path = std::filesystem::temp_directory_path() / "ldr_test_ckpt.bin";
  const Mlp m = Mlp::kaiming(7, 3, 5, 9);
  save_checkpoint(m, path);
  const Mlp back = load_checkpoint(path);
  CHECK(back.d() == 7);
  CHECK(back.h() == 3);
  CHECK(back.K() == 5);
  CHECK(back.params() == m.params());

  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "LDRMLP01short";
  }
  CHECK_THROWS(load_checkpoint(path));
  std::filesystem::remove(path);
}
