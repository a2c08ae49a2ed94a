#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ldr/ldr_losses.hpp"
#include "ldr/loss_registry.hpp"

namespace ldr {

/// Per-label loss oracle: value and score gradient of psi(f, y).
using LossEvaluator = std::function<LossGrad(std::span<const double>, std::size_t)>;

LossEvaluator evaluator_for(const Loss& loss);

/// Throws DomainError unless q is a finite probability vector summing to 1 within 1e-9.
void require_distribution(std::span<const double> q);

/// sum_l q_l psi(f, l); fills `grad` when non-empty.
double conditional_risk(const LossEvaluator& loss, std::span<const double> f, std::span<const double> q,
                        std::span<double> grad = {});

struct RiskMinOptions {
  std::optional<double> ball_radius;  // projected descent onto ||f||_2 <= radius
  double tol = 1e-8;
  std::size_t max_iters = 20000;
  std::size_t restarts = 5;  // the first start is f = 0, the rest are seeded Gaussian draws
  std::uint64_t seed = 0;
  double agree_tol = 1e-4;  // max-norm spread of restart minimizers counted as agreement
  std::optional<RealVec> initial;  // replaces f = 0 as the first start
};

struct RiskMinResult {
  RealVec f_star;
  double risk = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  bool restarts_agree = true;
  double grad_norm = 0.0;  // gradient mapping norm at f_star
};

/// Gradient descent with Armijo backtracking on the conditional risk. Iterates are centered
/// (sum f = 0) because every registered loss is shift invariant. The best restart is returned.
RiskMinResult minimize_conditional_risk(const LossEvaluator& loss, std::span<const double> q,
                                        const RiskMinOptions& options = {});

/// True iff f_i < f_j for every pair with q_i < q_j - tol.
bool rank_preserving(std::span<const double> f, std::span<const double> q, double tol = 1e-6);

/// Squared-error conditional risk is minimized at p = q.
RealVec mse_optimum_oracle(std::span<const double> q);

struct SceCheck {
  bool applicable = true;  // false when q has a zero entry (boundary optimum)
  bool holds = false;
  double residual = 0.0;  // max deviation of 1/p from the fitted affine function of 1/q, relative
};

/// Minimizes the SCE conditional risk and fits 1/p*_i = a / q_i + b.
SceCheck sce_optimum_check(std::span<const double> q, double alpha, double A, std::uint64_t seed = 0);

/// One row of the calibrate report.
struct ClaimResult {
  std::string claim;
  bool passed = false;
  std::size_t checked = 0;
  std::size_t failed = 0;
  std::size_t inconclusive = 0;  // restarts disagreed; excluded from the verdict
  double worst = 0.0;            // largest observed deviation, where the claim has one
};

/// Runs every calibration claim at test scale; `instances` random q per claim.
std::vector<ClaimResult> run_calibration_suite(std::size_t instances, std::uint64_t seed);

/// CSV with header "schema_version,claim,passed,checked,failed,inconclusive,worst".
std::string calibration_csv(const std::vector<ClaimResult>& rows);

}  // namespace ldr
