#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ldr/baseline_losses.hpp"
#include "ldr/ldr_losses.hpp"
#include "ldr/topk_dro.hpp"

namespace ldr {

/// Loss family name plus named hyperparameters, as written in experiment configs.
struct LossSpec {
  std::string name;
  std::map<std::string, double> params;
};

/// Every name accepted by make_loss: "ldr_kl", "aldr_kl", "ldr_k_kl" and the baseline names.
std::vector<std::string> registered_loss_names();

/// A validated, ready-to-evaluate loss.
///
/// ldr_kl: lambda (default 1, may be inf), c (default 0.1).
/// aldr_kl: lambda0 (default 1), alpha (default 2 log K / lambda0, resolved per call), c.
/// ldr_k_kl: lambda, k (default 1), c.
class Loss {
 public:
  explicit Loss(const LossSpec& spec);

  const LossSpec& spec() const noexcept { return spec_; }
  const std::string& name() const noexcept { return spec_.name; }

  /// Stateless evaluation. For aldr_kl this solves the inner maximization over lambda exactly.
  LossGrad evaluate(std::span<const double> f, std::size_t y) const;

  /// True for aldr_kl, whose training rule carries a per-sample lambda.
  bool is_adaptive() const noexcept;

  /// Training-time ALDR update; `lambda` is read and overwritten.
  LossGrad adaptive_step(std::span<const double> f, std::size_t y, double& lambda) const;

  /// ALDR parameters with alpha resolved for K classes.
  AldrKlParams aldr_params(std::size_t K) const;

  /// Whether the trainer feeds L1-normalized logits (the LDR family) or raw logits.
  bool uses_normalized_logits() const noexcept;

 private:
  struct LdrKl { LdrKlParams params; };
  struct AldrKl { double lambda0; double alpha; Margin margin; };  // alpha <= 0: auto
  struct LdrKKl { double lambda; OmegaK omega; Margin margin; };

  LossSpec spec_;
  std::variant<LdrKl, AldrKl, LdrKKl, BaselineSpec> impl_;
};

}  // namespace ldr
