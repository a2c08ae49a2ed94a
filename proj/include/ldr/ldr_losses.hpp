#pragma once

#include <cstddef>
#include <span>

#include "ldr/numerics.hpp"

namespace ldr {

/// Fixed class margin c, applied to every k != y.
struct Margin {
  double c = 0.0;
};

struct LdrKlParams {
  double lambda = 1.0;  // may be 0 or kInfinity
  Margin margin{};
};

struct AldrKlParams {
  double lambda0 = 1.0;
  double alpha = 1.0;
  Margin margin{};
};

/// Loss value and its gradient with respect to the score vector.
struct LossGrad {
  double value = 0.0;
  RealVec grad;
};

/// u_k = f_k - f_y + c * [k != y].
RealVec shifted_scores(std::span<const double> f, std::size_t y, Margin margin);
void shifted_scores(std::span<const double> f, std::size_t y, Margin margin, std::span<double> out);

/// Distributional weights maximizing the KL-regularized inner problem at temperature lambda.
/// lambda == 0 gives the lowest-index argmax one-hot, lambda == inf the uniform vector.
RealVec dw_weights(std::span<const double> f, std::size_t y, const LdrKlParams& params);

/// lambda * log((1/K) sum_k exp(u_k / lambda)), with closed forms at lambda = 0 (Crammer-Singer)
/// and lambda = inf (mean of u). The 1/K keeps the loss at zero for uniform scores.
LossGrad ldr_kl(std::span<const double> f, std::size_t y, const LdrKlParams& params);

/// [lambda0 - KL(p || 1/K) / alpha]_+
double aldr_lambda_update(std::span<const double> p, double lambda0, double alpha);

struct AldrExactResult {
  double value = 0.0;
  double lambda_star = 0.0;
  RealVec p_star;
};

/// Maximizes lambda * log((1/K) sum exp(u / lambda)) - alpha/2 (lambda - lambda0)^2 over lambda >= 0.
AldrExactResult aldr_kl_exact(std::span<const double> f, std::size_t y, const AldrKlParams& params);

struct AldrStepResult {
  double lambda_next = 0.0;
  double value = 0.0;  // ALDR objective evaluated at lambda_next
  RealVec grad;
};

/// One per-sample update of the alternating scheme: weights at lambda_prev, new lambda from the
/// KL of those weights, then the score gradient of the LDR-KL loss at the new lambda.
AldrStepResult aldr_kl_step(std::span<const double> f, std::size_t y, double lambda_prev,
                            const AldrKlParams& params);

}  // namespace ldr
