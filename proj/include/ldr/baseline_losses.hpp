#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "ldr/ldr_losses.hpp"

namespace ldr {

enum class BaselineFamily {
  CE, CS, WW, MAE, NCE, RLL, GCE, TGCE, SCE, JS, MSE, AGCE, AUL, NCE_RCE, NCE_AGCE, NCE_AUL
};

/// Stable lowercase registry name, e.g. "nce_agce".
std::string_view baseline_name(BaselineFamily family);
std::optional<BaselineFamily> baseline_from_name(std::string_view name);

/// Comparison loss descriptor. Parameter names: c (CS, WW), alpha (RLL, SCE, combo weight on
/// NCE), beta (combo weight on the partner), q (GCE, TGCE, AGCE, AUL), k_trunc (TGCE), A (SCE,
/// NCE+RCE), pi1 (JS), a (AGCE, AUL). Missing parameters take family defaults.
struct BaselineSpec {
  BaselineFamily family = BaselineFamily::CE;
  std::map<std::string, double> params;

  double param(const std::string& name) const;
  /// Throws ConfigError on unknown parameter names or out-of-range values.
  void validate() const;
};

/// Value and score gradient. Probability-based families go through softmax(f); CS and WW act on
/// raw scores.
LossGrad baseline_loss(const BaselineSpec& spec, std::span<const double> f, std::size_t y);

/// sum_j loss(f, j): constant in f for symmetric losses.
double symmetry_sum(const BaselineSpec& spec, std::span<const double> f);

/// True when the family is a softmax-head loss, hence invariant to f + c*1.
bool is_probability_based(BaselineFamily family);

inline constexpr double kProbFloor = 1e-12;

}  // namespace ldr
