#pragma once

#include <cstddef>
#include <span>

#include "ldr/ldr_losses.hpp"
#include "ldr/numerics.hpp"

namespace ldr {

/// Capped simplex {p >= 0 : sum p <= 1, p_l <= 1/k}.
struct OmegaK {
  std::size_t k = 1;
};

struct ProjectionResult {
  RealVec p;
  std::size_t a = 1;  // 1-based sorted position of the first coordinate not clamped to 1/k
  double objective = 0.0;
};

/// sum_i p_i q_i - lambda * sum_i p_i log(K p_i), with 0 log 0 = 0.
double omega_k_objective(std::span<const double> q, std::span<const double> p, double lambda);

/// Exact maximizer of the KL-regularized linear objective over Omega(k), via one sort and one
/// backward scan over the sorted scores.
ProjectionResult omega_k_argmax(std::span<const double> q, double lambda, OmegaK omega);

/// Euclidean projection onto Omega(k) (dual bisection on the sum constraint).
RealVec project_omega_k(std::span<const double> v, OmegaK omega);

struct OracleOptions {
  std::size_t max_iters = 200000;
  double step_tol = 1e-14;  // stop once multipliers move less than this for 20 iterations
};

struct OracleRun {
  RealVec p;
  RealVec objective_trace;  // dual objective of accepted iterates, nonincreasing
  std::size_t iterations = 0;
};

/// Independent check for omega_k_argmax: monotone accelerated projected-gradient descent on the
/// Lagrange dual (multipliers for the sum and cap constraints, projected onto the nonnegative
/// orthant), followed by primal recovery. No sorting and no candidate scan. Meant for small K.
OracleRun omega_k_oracle_run(std::span<const double> q, double lambda, OmegaK omega,
                             OracleOptions options = {});

inline RealVec omega_k_oracle(std::span<const double> q, double lambda, OmegaK omega,
                              OracleOptions options = {}) {
  return omega_k_oracle_run(q, lambda, omega, options).p;
}

/// KL-regularized DRO loss over Omega(k) on margin-shifted scores.
LossGrad ldr_k_kl(std::span<const double> f, std::size_t y, Margin margin, double lambda, OmegaK omega);

/// Mean of the k largest entries of max(0, u), the smoothed loss's lambda -> 0 limit.
LossGrad topk_svm(std::span<const double> f, std::size_t y, Margin margin, OmegaK omega);

}  // namespace ldr
