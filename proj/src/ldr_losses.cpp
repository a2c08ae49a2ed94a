#include "ldr/ldr_losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ldr {
namespace {

void check_label(std::span<const double> f, std::size_t y) {
  if (f.size() < 2) throw DomainError("scores need at least two classes");
  if (y >= f.size()) throw std::out_of_range("class index out of range");
}

// d/dlambda of lambda * LSE_mean(u / lambda) is -KL(p_lambda || 1/K).
double aldr_derivative(std::span<const double> u, double lambda, const AldrKlParams& params,
                       RealVec& scratch) {
  tempered_softmax(u, lambda, scratch);
  return -kl_to_uniform(scratch) - params.alpha * (lambda - params.lambda0);
}

double aldr_objective(std::span<const double> u, double lambda, const AldrKlParams& params) {
  const double penalty = 0.5 * params.alpha * (lambda - params.lambda0) * (lambda - params.lambda0);
  if (lambda <= 0.0) return *std::max_element(u.begin(), u.end()) - penalty;
  return log_sum_exp(u, lambda) - penalty;
}

}  // namespace

void shifted_scores(std::span<const double> f, std::size_t y, Margin margin, std::span<double> out) {
  check_label(f, y);
  const double fy = f[y];
  for (std::size_t k = 0; k < f.size(); ++k) out[k] = f[k] - fy + (k == y ? 0.0 : margin.c);
  out[y] = 0.0;
}

RealVec shifted_scores(std::span<const double> f, std::size_t y, Margin margin) {
  RealVec u(f.size());
  shifted_scores(f, y, margin, u);
  return u;
}

RealVec dw_weights(std::span<const double> f, std::size_t y, const LdrKlParams& params) {
  if (params.lambda < 0.0 || std::isnan(params.lambda)) throw DomainError("dw_weights: lambda must be >= 0");
  const RealVec u = shifted_scores(f, y, params.margin);
  const std::size_t K = f.size();
  if (std::isinf(params.lambda)) return RealVec(K, 1.0 / static_cast<double>(K));
  if (params.lambda == 0.0) {
    RealVec p(K, 0.0);
    p[argmax_lowest(u)] = 1.0;
    return p;
  }
  return tempered_softmax(u, params.lambda);
}

LossGrad ldr_kl(std::span<const double> f, std::size_t y, const LdrKlParams& params) {
  if (params.lambda < 0.0 || std::isnan(params.lambda)) throw DomainError("ldr_kl: lambda must be >= 0");
  require_finite(f, "ldr_kl");
  const RealVec u = shifted_scores(f, y, params.margin);
  const std::size_t K = f.size();

  LossGrad out;
  if (std::isinf(params.lambda)) {
    double total = 0.0;
    for (double v : u) total += v;
    out.value = total / static_cast<double>(K);
    out.grad.assign(K, 1.0 / static_cast<double>(K));
  } else if (params.lambda == 0.0) {
    const std::size_t top = argmax_lowest(u);
    out.value = u[top];  // u_y = 0, so this is max(0, max_{k != y} u_k)
    out.grad.assign(K, 0.0);
    out.grad[top] = 1.0;
  } else {
    out.value = log_sum_exp(u, params.lambda);
    out.grad = tempered_softmax(u, params.lambda);
  }
  out.grad[y] -= 1.0;
  return out;
}

double aldr_lambda_update(std::span<const double> p, double lambda0, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("aldr_lambda_update: alpha must be positive");
  return std::max(0.0, lambda0 - kl_to_uniform(p) / alpha);
}

AldrExactResult aldr_kl_exact(std::span<const double> f, std::size_t y, const AldrKlParams& params) {
  if (!(params.alpha > 0.0) || !(params.lambda0 > 0.0) || std::isinf(params.lambda0)) {
    throw DomainError("aldr_kl_exact: need alpha > 0 and finite lambda0 > 0");
  }
  require_finite(f, "aldr_kl_exact");
  const RealVec u = shifted_scores(f, y, params.margin);
  const std::size_t K = u.size();
  RealVec scratch(K);

  // The objective is not concave in lambda in general (the LSE part is convex in lambda), so
  // bracket every stationary point on a grid over [0, lambda0], refine each by bisection on the
  // derivative sign, and keep the best candidate. The maximizer never exceeds lambda0.
  constexpr int kGrid = 64;
  constexpr double kTol = 1e-8;
  const double lo_edge = params.lambda0 * 1e-9;

  double best_lambda = 0.0;
  double best_value = aldr_objective(u, 0.0, params);
  auto consider = [&](double lambda) {
    const double v = aldr_objective(u, lambda, params);
    if (v > best_value) {
      best_value = v;
      best_lambda = lambda;
    }
  };

  double prev_x = lo_edge;
  double prev_d = aldr_derivative(u, prev_x, params, scratch);
  for (int i = 1; i <= kGrid; ++i) {
    const double x = params.lambda0 * static_cast<double>(i) / kGrid;
    const double d = aldr_derivative(u, x, params, scratch);
    if (prev_d > 0.0 && d <= 0.0) {
      double lo = prev_x, hi = x;
      while (hi - lo > kTol) {
        const double mid = 0.5 * (lo + hi);
        if (aldr_derivative(u, mid, params, scratch) > 0.0) lo = mid; else hi = mid;
      }
      consider(0.5 * (lo + hi));
    }
    prev_x = x;
    prev_d = d;
  }
  consider(params.lambda0);

  AldrExactResult result;
  result.lambda_star = best_lambda;
  result.value = best_value;
  if (best_lambda > 0.0) {
    result.p_star = tempered_softmax(u, best_lambda);
  } else {
    result.p_star.assign(K, 0.0);
    result.p_star[argmax_lowest(u)] = 1.0;
  }
  return result;
}

AldrStepResult aldr_kl_step(std::span<const double> f, std::size_t y, double lambda_prev,
                            const AldrKlParams& params) {
  if (lambda_prev < 0.0) throw DomainError("aldr_kl_step: lambda_prev must be >= 0");
  const RealVec p = dw_weights(f, y, LdrKlParams{lambda_prev, params.margin});
  AldrStepResult out;
  out.lambda_next = aldr_lambda_update(p, params.lambda0, params.alpha);
  LossGrad lg = ldr_kl(f, y, LdrKlParams{out.lambda_next, params.margin});
  const double gap = out.lambda_next - params.lambda0;
  out.value = lg.value - 0.5 * params.alpha * gap * gap;
  out.grad = std::move(lg.grad);
  return out;
}

}  // namespace ldr
