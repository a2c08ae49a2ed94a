#include "ldr/loss_registry.hpp"

#include <cmath>
#include <set>

namespace ldr {
namespace {

constexpr double kDefaultMargin = 0.1;

double take(const LossSpec& spec, const char* key, double fallback) {
  auto it = spec.params.find(key);
  return it == spec.params.end() ? fallback : it->second;
}

void check_keys(const LossSpec& spec, std::set<std::string> allowed) {
  for (const auto& [key, value] : spec.params) {
    if (!allowed.contains(key)) throw ConfigError(spec.name + ": unknown parameter '" + key + "'");
    if (std::isnan(value)) throw ConfigError(spec.name + ": parameter '" + key + "' is NaN");
  }
}

}  // namespace

std::vector<std::string> registered_loss_names() {
  std::vector<std::string> names{"ldr_kl", "aldr_kl", "ldr_k_kl"};
  for (const char* n : {"ce", "cs", "ww", "mae", "nce", "rll", "gce", "tgce", "sce", "js", "mse", "agce",
                        "aul", "nce_rce", "nce_agce", "nce_aul"}) {
    names.emplace_back(n);
  }
  return names;
}

Loss::Loss(const LossSpec& spec) : spec_(spec), impl_(LdrKl{}) {
  if (spec.name == "ldr_kl") {
    check_keys(spec, {"lambda", "c"});
    LdrKlParams p{take(spec, "lambda", 1.0), Margin{take(spec, "c", kDefaultMargin)}};
    if (p.lambda < 0.0) throw ConfigError("ldr_kl: lambda must be >= 0");
    if (p.margin.c < 0.0) throw ConfigError("ldr_kl: c must be >= 0");
    impl_ = LdrKl{p};
  } else if (spec.name == "aldr_kl") {
    check_keys(spec, {"lambda0", "alpha", "c"});
    AldrKl p{take(spec, "lambda0", 1.0), take(spec, "alpha", 0.0), Margin{take(spec, "c", kDefaultMargin)}};
    if (!(p.lambda0 > 0.0) || std::isinf(p.lambda0)) throw ConfigError("aldr_kl: lambda0 must be positive and finite");
    if (spec.params.contains("alpha") && !(p.alpha > 0.0)) throw ConfigError("aldr_kl: alpha must be > 0");
    if (p.margin.c < 0.0) throw ConfigError("aldr_kl: c must be >= 0");
    impl_ = p;
  } else if (spec.name == "ldr_k_kl") {
    check_keys(spec, {"lambda", "k", "c"});
    const double k = take(spec, "k", 1.0);
    LdrKKl p{take(spec, "lambda", 1.0), OmegaK{static_cast<std::size_t>(k)}, Margin{take(spec, "c", kDefaultMargin)}};
    if (!(p.lambda > 0.0) || std::isinf(p.lambda)) throw ConfigError("ldr_k_kl: lambda must be positive and finite");
    if (k < 1.0 || k != std::floor(k)) throw ConfigError("ldr_k_kl: k must be a positive integer");
    impl_ = p;
  } else if (auto family = baseline_from_name(spec.name)) {
    BaselineSpec b{*family, spec.params};
    b.validate();
    impl_ = b;
  } else {
    throw ConfigError("unknown loss '" + spec.name + "'");
  }
}

bool Loss::is_adaptive() const noexcept { return std::holds_alternative<AldrKl>(impl_); }

bool Loss::uses_normalized_logits() const noexcept { return !std::holds_alternative<BaselineSpec>(impl_); }

AldrKlParams Loss::aldr_params(std::size_t K) const {
  const auto& a = std::get<AldrKl>(impl_);
  const double alpha = a.alpha > 0.0 ? a.alpha : 2.0 * std::log(static_cast<double>(K)) / a.lambda0;
  return AldrKlParams{a.lambda0, alpha, a.margin};
}

LossGrad Loss::evaluate(std::span<const double> f, std::size_t y) const {
  return std::visit(
      [&](const auto& impl) -> LossGrad {
        using T = std::decay_t<decltype(impl)>;
        if constexpr (std::is_same_v<T, LdrKl>) {
          return ldr_kl(f, y, impl.params);
        } else if constexpr (std::is_same_v<T, AldrKl>) {
          const AldrExactResult r = aldr_kl_exact(f, y, aldr_params(f.size()));
          LossGrad out{r.value, r.p_star};
          out.grad[y] -= 1.0;
          return out;
        } else if constexpr (std::is_same_v<T, LdrKKl>) {
          if (impl.omega.k > f.size()) throw ConfigError("ldr_k_kl: k exceeds the number of classes");
          return ldr_k_kl(f, y, impl.margin, impl.lambda, impl.omega);
        } else {
          return baseline_loss(impl, f, y);
        }
      },
      impl_);
}

LossGrad Loss::adaptive_step(std::span<const double> f, std::size_t y, double& lambda) const {
  AldrStepResult step = aldr_kl_step(f, y, lambda, aldr_params(f.size()));
  lambda = step.lambda_next;
  return LossGrad{step.value, std::move(step.grad)};
}

}  // namespace ldr
