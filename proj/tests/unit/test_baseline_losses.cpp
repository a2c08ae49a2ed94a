#include <cmath>
#include <random>

#include "doctest.h"
#include "ldr/baseline_losses.hpp"
#include "unit/test_support.hpp"

using namespace ldr;

namespace {

const std::vector<BaselineFamily> kAllFamilies{
    BaselineFamily::CE,   BaselineFamily::CS,      BaselineFamily::WW,       BaselineFamily::MAE,
    BaselineFamily::NCE,  BaselineFamily::RLL,     BaselineFamily::GCE,      BaselineFamily::TGCE,
    BaselineFamily::SCE,  BaselineFamily::JS,      BaselineFamily::MSE,      BaselineFamily::AGCE,
    BaselineFamily::AUL,  BaselineFamily::NCE_RCE, BaselineFamily::NCE_AGCE, BaselineFamily::NCE_AUL};

BaselineSpec spec(BaselineFamily family, std::map<std::string, double> params = {}) {
  BaselineSpec s{family, std::move(params)};
  s.validate();
  return s;
}

// Rejects instances within `gap` of a kink of the piecewise losses.
bool near_kink(const BaselineSpec& s, std::span<const double> f, std::size_t y, double gap) {
  if (s.family == BaselineFamily::CS || s.family == BaselineFamily::WW) {
    const double c = s.param("c");
    RealVec u(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) u[k] = k == y ? 0.0 : f[k] - f[y] + c;
    for (std::size_t a = 0; a < u.size(); ++a) {
      if (a != y && std::abs(u[a]) < gap) return true;
      for (std::size_t b = a + 1; b < u.size(); ++b) {
        if (s.family == BaselineFamily::CS && std::abs(u[a] - u[b]) < gap) return true;
      }
    }
  }
  if (s.family == BaselineFamily::TGCE) {
    const RealVec p = tempered_softmax(f, 1.0);
    if (std::abs(p[y] - s.param("k_trunc")) < gap) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("names round-trip through the registry") {
  for (auto family : kAllFamilies) CHECK(baseline_from_name(baseline_name(family)) == family);
  CHECK_FALSE(baseline_from_name("focal").has_value());
}

TEST_CASE("closed-form values") {
  CHECK(baseline_loss(spec(BaselineFamily::CE), RealVec{0, 0}, 0).value == doctest::Approx(std::log(2.0)));
  CHECK(baseline_loss(spec(BaselineFamily::MAE), RealVec{50, 0, 0}, 0).value == doctest::Approx(0.0));
  CHECK(baseline_loss(spec(BaselineFamily::MAE), RealVec{0, 0}, 0).value == doctest::Approx(1.0));
  CHECK(baseline_loss(spec(BaselineFamily::MSE), RealVec{0, 0}, 0).value == doctest::Approx(0.5));
  for (std::size_t K : {2u, 5u, 11u}) {
    CHECK(baseline_loss(spec(BaselineFamily::NCE), RealVec(K, 0.0), 1).value ==
          doctest::Approx(1.0 / static_cast<double>(K)));
  }
  CHECK(baseline_loss(spec(BaselineFamily::CS, {{"c", 0.5}}), RealVec{1, 3, 2}, 0).value == doctest::Approx(2.5));
  CHECK(baseline_loss(spec(BaselineFamily::WW, {{"c", 0.5}}), RealVec{1, 3, 2}, 0).value == doctest::Approx(4.0));
}

TEST_CASE("GCE at q = 1 is half of MAE, at q = 0 it is CE") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t K = 2 + test::random_index(rng, 10);
    const RealVec f = test::random_scores(rng, K);
    const std::size_t y = test::random_index(rng, K);
    CHECK(baseline_loss(spec(BaselineFamily::GCE, {{"q", 1.0}}), f, y).value ==
          doctest::Approx(0.5 * baseline_loss(spec(BaselineFamily::MAE), f, y).value).epsilon(1e-14));
    CHECK(baseline_loss(spec(BaselineFamily::GCE, {{"q", 0.0}}), f, y).value ==
          doctest::Approx(baseline_loss(spec(BaselineFamily::CE), f, y).value).epsilon(1e-14));
  }
}

TEST_CASE("SCE is the weighted sum of CE and MAE") {
  std::mt19937_64 rng(2);
  const auto sce = spec(BaselineFamily::SCE, {{"alpha", 0.5}, {"A", -4.0}});
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t K = 2 + test::random_index(rng, 10);
    const RealVec f = test::random_scores(rng, K);
    const std::size_t y = test::random_index(rng, K);
    const double expected = 0.5 * baseline_loss(spec(BaselineFamily::CE), f, y).value +
                            0.5 * 2.0 * baseline_loss(spec(BaselineFamily::MAE), f, y).value;
    CHECK(baseline_loss(sce, f, y).value == doctest::Approx(expected).epsilon(1e-13));
  }
}

TEST_CASE("combination losses are weighted sums of their parts") {
  const RealVec f{0.3, -1.2, 2.0, 0.1};
  const auto nce = baseline_loss(spec(BaselineFamily::NCE), f, 2).value;
  const auto mae = baseline_loss(spec(BaselineFamily::MAE), f, 2).value;
  const auto agce = baseline_loss(spec(BaselineFamily::AGCE), f, 2).value;
  const auto aul = baseline_loss(spec(BaselineFamily::AUL), f, 2).value;
  CHECK(baseline_loss(spec(BaselineFamily::NCE_RCE, {{"alpha", 0.1}, {"beta", 9.9}}), f, 2).value ==
        doctest::Approx(0.1 * nce + 9.9 * 2.0 * mae));
  CHECK(baseline_loss(spec(BaselineFamily::NCE_AGCE, {{"alpha", 9.9}, {"beta", 0.1}}), f, 2).value ==
        doctest::Approx(9.9 * nce + 0.1 * agce));
  CHECK(baseline_loss(spec(BaselineFamily::NCE_AUL), f, 2).value == doctest::Approx(5.0 * nce + 5.0 * aul));
}

TEST_CASE("JS normalizer makes small pi1 CE-like") {
  // As pi1 -> 0, KL(e_y, m)/Z -> 0 and KL(p, m)/Z -> -log p_y.
  const RealVec f{0.5, -0.2, 1.0};
  const double js = baseline_loss(spec(BaselineFamily::JS, {{"pi1", 1e-6}}), f, 0).value;
  const double ce = baseline_loss(spec(BaselineFamily::CE), f, 0).value;
  CHECK(js == doctest::Approx(ce).epsilon(1e-4));
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(spec(BaselineFamily::GCE, {{"q", 1.5}}), ConfigError);
  CHECK_THROWS_AS(spec(BaselineFamily::AUL, {{"a", 1.0}}), ConfigError);
  CHECK_THROWS_AS(spec(BaselineFamily::AGCE, {{"q", 0.0}}), ConfigError);
  CHECK_THROWS_AS(spec(BaselineFamily::SCE, {{"A", 4.0}}), ConfigError);
  CHECK_THROWS_AS(spec(BaselineFamily::RLL, {{"alpha", 0.0}}), ConfigError);
  CHECK_THROWS_AS(spec(BaselineFamily::JS, {{"pi1", 1.0}}), ConfigError);
  CHECK_THROWS_AS(spec(BaselineFamily::CE, {{"q", 0.5}}), ConfigError);
}

TEST_CASE("every family matches finite differences") {
  std::mt19937_64 rng(314);
  for (auto family : kAllFamilies) {
    const BaselineSpec s = spec(family);
    double worst = 0.0;
    int checked = 0;
    while (checked < 200) {
      const std::size_t K = 2 + test::random_index(rng, 29);
      const RealVec f = test::random_scores(rng, K, 1.5);
      const std::size_t y = test::random_index(rng, K);
      if (near_kink(s, f, y, 1e-3)) continue;
      const auto analytic = baseline_loss(s, f, y);
      const auto numeric =
          finite_diff_grad([&](std::span<const double> x) { return baseline_loss(s, x, y).value; }, f);
      worst = std::max(worst, relative_error(analytic.grad, numeric));
      ++checked;
    }
    INFO("family = " << baseline_name(family));
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("symmetric families have constant label sums") {
  std::mt19937_64 rng(21);
  const std::vector<BaselineSpec> symmetric{spec(BaselineFamily::MAE), spec(BaselineFamily::NCE),
                                            spec(BaselineFamily::RLL), spec(BaselineFamily::GCE, {{"q", 1.0}}),
                                            spec(BaselineFamily::SCE, {{"alpha", 0.0}})};
  for (const auto& s : symmetric) {
    for (std::size_t K : {3u, 4u, 10u}) {
      const double reference = symmetry_sum(s, RealVec(K, 0.0));
      double deviation = 0.0;
      for (int trial = 0; trial < 100; ++trial) {
        deviation = std::max(deviation, std::abs(symmetry_sum(s, test::random_scores(rng, K)) - reference));
      }
      INFO(baseline_name(s.family) << " K=" << K);
      CHECK(deviation <= 1e-8);
    }
  }
  CHECK(symmetry_sum(spec(BaselineFamily::MAE), test::random_scores(rng, 4)) == doctest::Approx(6.0));
  CHECK(symmetry_sum(spec(BaselineFamily::NCE), test::random_scores(rng, 7)) == doctest::Approx(1.0));
}

TEST_CASE("non-symmetric families have a witness pair") {
  const std::vector<BaselineSpec> asymmetric{spec(BaselineFamily::CE),   spec(BaselineFamily::CS),
                                             spec(BaselineFamily::WW),   spec(BaselineFamily::MSE),
                                             spec(BaselineFamily::TGCE), spec(BaselineFamily::AGCE),
                                             spec(BaselineFamily::AUL)};
  const RealVec a{0.0, 0.0, 0.0, 0.0};
  const RealVec b{4.0, -1.0, 0.5, -3.0};
  for (const auto& s : asymmetric) {
    INFO(baseline_name(s.family));
    CHECK(std::abs(symmetry_sum(s, a) - symmetry_sum(s, b)) > 1e-3);
  }
}

TEST_CASE("probability-based losses ignore a constant shift") {
  std::mt19937_64 rng(22);
  for (auto family : kAllFamilies) {
    if (!is_probability_based(family)) continue;
    const BaselineSpec s = spec(family);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t K = 2 + test::random_index(rng, 10);
      const RealVec f = test::random_scores(rng, K);
      RealVec g = f;
      for (double& v : g) v += 3.7;
      const std::size_t y = test::random_index(rng, K);
      CHECK(std::abs(baseline_loss(s, f, y).value - baseline_loss(s, g, y).value) <= 1e-10);
    }
  }
}

TEST_CASE("log guard keeps saturated scores finite") {
  const RealVec f{-80.0, 80.0, 0.0};
  for (auto family : kAllFamilies) {
    const auto r = baseline_loss(spec(family), f, 0);
    CHECK(std::isfinite(r.value));
    for (double g : r.grad) CHECK(std::isfinite(g));
  }
}
