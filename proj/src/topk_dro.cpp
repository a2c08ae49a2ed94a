#include "ldr/topk_dro.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ldr {
namespace {

void check_omega(std::size_t K, OmegaK omega) {
  if (omega.k < 1 || omega.k > K) throw DomainError("Omega(k): k must lie in [1, K]");
}

// Stable sort keeps ties in original index order.
std::vector<std::size_t> descending_order(std::span<const double> q) {
  std::vector<std::size_t> order(q.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return q[a] > q[b]; });
  return order;
}

struct Ranked {
  double value;
  std::size_t index;
};

// Descending by value, ties by index: the same order as the stable sort, but the scores travel
// with their indices so later passes read memory sequentially.
std::vector<Ranked> ranked_descending(std::span<const double> q) {
  std::vector<Ranked> r(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) r[i] = {q[i], i};
  std::sort(r.begin(), r.end(), [](const Ranked& a, const Ranked& b) {
    return a.value > b.value || (a.value == b.value && a.index < b.index);
  });
  return r;
}

}  // namespace

double omega_k_objective(std::span<const double> q, std::span<const double> p, double lambda) {
  const double K = static_cast<double>(q.size());
  double value = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    value += p[i] * q[i];
    if (p[i] > 0.0) value -= lambda * p[i] * std::log(K * p[i]);
  }
  return value;
}

ProjectionResult omega_k_argmax(std::span<const double> q, double lambda, OmegaK omega) {
  const std::size_t K = q.size();
  if (!(lambda > 0.0) || std::isinf(lambda)) throw DomainError("omega_k_argmax: lambda must be positive and finite");
  if (K == 0) throw DomainError("omega_k_argmax: empty input");
  check_omega(K, omega);
  require_finite(q, "omega_k_argmax");

  const auto ranked = ranked_descending(q);
  const double inv_k = 1.0 / static_cast<double>(omega.k);
  const double log_K = std::log(static_cast<double>(K));

  // tail[a] = sum_{j >= a} exp((q_[j] - q_[a]) / lambda), every exponent <= 0. The sum the
  // closed form needs is exp(q_[a]/lambda - 1) * tail[a].
  std::vector<double> tail(K);
  tail[K - 1] = 1.0;
  for (std::size_t a = K - 1; a-- > 0;) {
    tail[a] = 1.0 + tail[a + 1] * std::exp((ranked[a + 1].value - ranked[a].value) / lambda);
  }

  // log of the coordinate value at sorted position i >= a for a given a (0-based here).
  auto log_coord = [&](std::size_t a, std::size_t i, double budget) {
    const double free_branch = ranked[i].value / lambda - 1.0 - log_K;
    if (budget <= 0.0) return -kInfinity;
    const double capped_branch = std::log(budget) - std::log(tail[a]) + (ranked[i].value - ranked[a].value) / lambda;
    return std::min(free_branch, capped_branch);
  };

  std::size_t chosen = K - 1;
  for (std::size_t a = 0; a < K; ++a) {
    const double budget = 1.0 - static_cast<double>(a) * inv_k;
    if (log_coord(a, a, budget) <= std::log(inv_k)) {
      chosen = a;
      break;
    }
  }

  ProjectionResult result;
  result.a = chosen + 1;
  result.p.assign(K, 0.0);
  const double budget = 1.0 - static_cast<double>(chosen) * inv_k;
  for (std::size_t i = 0; i < K; ++i) {
    result.p[ranked[i].index] = i < chosen ? inv_k : std::min(inv_k, std::exp(log_coord(chosen, i, budget)));
  }
  result.objective = omega_k_objective(q, result.p, lambda);
  return result;
}

RealVec project_omega_k(std::span<const double> v, OmegaK omega) {
  const std::size_t K = v.size();
  check_omega(K, omega);
  const double cap = 1.0 / static_cast<double>(omega.k);
  auto clamped_sum = [&](double tau) {
    double s = 0.0;
    for (double x : v) s += std::clamp(x - tau, 0.0, cap);
    return s;
  };
  double tau = 0.0;
  if (clamped_sum(0.0) > 1.0) {
    double lo = 0.0;
    double hi = *std::max_element(v.begin(), v.end());
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (clamped_sum(mid) > 1.0) lo = mid; else hi = mid;
    }
    tau = hi;
  }
  RealVec out(K);
  for (std::size_t i = 0; i < K; ++i) out[i] = std::clamp(v[i] - tau, 0.0, cap);
  return out;
}

OracleRun omega_k_oracle_run(std::span<const double> q, double lambda, OmegaK omega, OracleOptions options) {
  const std::size_t K = q.size();
  check_omega(K, omega);
  if (!(lambda > 0.0) || std::isinf(lambda)) throw DomainError("omega_k_oracle: lambda must be positive and finite");
  require_finite(q, "omega_k_oracle");

  // Lagrange dual of the scaled problem, minimized over x = (beta, gamma_1..gamma_K) >= 0:
  //   D(x) = sum_i exp(q_i/lambda - 1 - beta - gamma_i) / K + beta + sum_i gamma_i / k
  // with primal recovery p_i = exp(q_i/lambda - 1 - beta - gamma_i) / K.
  const double log_K = std::log(static_cast<double>(K));
  const double inv_k = 1.0 / static_cast<double>(omega.k);
  RealVec base(K);
  for (std::size_t i = 0; i < K; ++i) base[i] = q[i] / lambda - 1.0 - log_K;

  auto primal = [&](std::span<const double> x, std::span<double> p) {
    for (std::size_t i = 0; i < K; ++i) p[i] = std::exp(base[i] - x[0] - x[i + 1]);
  };
  RealVec p(K);
  auto dual_value = [&](std::span<const double> x) {
    primal(x, p);
    double v = x[0];
    for (std::size_t i = 0; i < K; ++i) v += p[i] + x[i + 1] * inv_k;
    return v;
  };
  auto dual_gradient = [&](std::span<const double> x, std::span<double> g) {
    primal(x, p);
    g[0] = 1.0;
    for (std::size_t i = 0; i < K; ++i) {
      g[0] -= p[i];
      g[i + 1] = inv_k - p[i];
    }
  };

  // Start at the multiplier that would normalize the uncapped solution, so the exponentials
  // begin in range.
  RealVec x(K + 1, 0.0);
  {
    const double m = *std::max_element(base.begin(), base.end());
    double s = 0.0;
    for (double b : base) s += std::exp(b - m);
    x[0] = std::max(0.0, m + std::log(s));
  }

  OracleRun run;
  double value = dual_value(x);
  run.objective_trace.push_back(value);
  RealVec y = x, g(K + 1), z(K + 1);
  double step = 1.0;
  double t = 1.0;
  std::size_t quiet = 0;
  for (std::size_t it = 0; it < options.max_iters; ++it) {
    run.iterations = it + 1;
    dual_gradient(y, g);
    const double y_value = dual_value(y);
    double z_value = 0.0;
    for (int bt = 0; bt < 100; ++bt) {
      double lin = 0.0, dist = 0.0;
      for (std::size_t i = 0; i <= K; ++i) {
        z[i] = std::max(0.0, y[i] - step * g[i]);
        lin += g[i] * (z[i] - y[i]);
        dist += (z[i] - y[i]) * (z[i] - y[i]);
      }
      z_value = dual_value(z);
      if (z_value <= y_value + lin + dist / (2.0 * step) + 1e-16 * std::abs(y_value)) break;
      step *= 0.5;
    }

    double moved = 0.0;
    if (z_value <= value) {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      for (std::size_t i = 0; i <= K; ++i) {
        moved = std::max(moved, std::abs(z[i] - x[i]));
        const double next = z[i];
        y[i] = next + ((t - 1.0) / t_next) * (next - x[i]);
        x[i] = next;
      }
      t = t_next;
      value = z_value;
    } else {
      // Momentum overshot: restart from the last accepted point.
      y = x;
      t = 1.0;
    }
    run.objective_trace.push_back(value);
    step = std::min(step * 2.0, 1e3);
    quiet = moved < options.step_tol ? quiet + 1 : 0;
    if (quiet >= 20) break;
  }

  primal(x, p);
  run.p = p;

  // The dual is flat near its minimizer, so the iterate only pins p to about sqrt(eps).
  // Take the capped set it found and solve the stationarity conditions on that set exactly.
  // Free coordinates above the cap join the set; failing that, the capped coordinate with the
  // most negative multiplier leaves it. The result is kept only if every KKT condition holds.
  std::vector<char> capped(K, 0);
  for (std::size_t i = 0; i < K; ++i) capped[i] = x[i + 1] > 0.0 ? 1 : 0;
  for (std::size_t round = 0; round <= 2 * K + 2; ++round) {
    std::size_t n_capped = 0;
    double m = -kInfinity;
    for (std::size_t i = 0; i < K; ++i) {
      if (capped[i]) ++n_capped;
      else m = std::max(m, base[i]);
    }
    const double room = 1.0 - static_cast<double>(n_capped) * inv_k;
    double beta = 0.0;
    if (m > -kInfinity) {
      double s = 0.0;
      for (std::size_t i = 0; i < K; ++i)
        if (!capped[i]) s += std::exp(base[i] - m);
      const double log_free = m + std::log(s);
      if (room <= 0.0) beta = kInfinity;
      else if (log_free > std::log(room)) beta = log_free - std::log(room);
    }
    RealVec candidate(K);
    bool changed = false;
    std::size_t worst = K;
    double worst_ratio = 1.0 - 1e-12;
    for (std::size_t i = 0; i < K; ++i) {
      const double free_p = std::exp(base[i] - beta);
      if (capped[i]) {
        candidate[i] = inv_k;
        if (free_p / inv_k < worst_ratio) {  // negative cap multiplier
          worst_ratio = free_p / inv_k;
          worst = i;
        }
      } else {
        candidate[i] = free_p;
        if (free_p > inv_k) {
          capped[i] = 1;
          changed = true;
        }
      }
    }
    if (changed) continue;
    if (worst < K) {
      capped[worst] = 0;
      continue;
    }
    run.p = std::move(candidate);
    break;
  }
  return run;
}

LossGrad ldr_k_kl(std::span<const double> f, std::size_t y, Margin margin, double lambda, OmegaK omega) {
  const RealVec u = shifted_scores(f, y, margin);
  const ProjectionResult proj = omega_k_argmax(u, lambda, omega);
  LossGrad out;
  out.value = proj.objective;
  out.grad = proj.p;
  double mass = 0.0;
  for (double v : proj.p) mass += v;
  out.grad[y] -= mass;
  return out;
}

LossGrad topk_svm(std::span<const double> f, std::size_t y, Margin margin, OmegaK omega) {
  const std::size_t K = f.size();
  check_omega(K, omega);
  const RealVec u = shifted_scores(f, y, margin);
  RealVec hinge(K);
  for (std::size_t i = 0; i < K; ++i) hinge[i] = std::max(0.0, u[i]);
  const auto order = descending_order(hinge);
  const double w = 1.0 / static_cast<double>(omega.k);

  LossGrad out;
  out.grad.assign(K, 0.0);
  for (std::size_t r = 0; r < omega.k; ++r) {
    const std::size_t l = order[r];
    out.value += w * hinge[l];
    if (u[l] > 0.0) {
      out.grad[l] += w;
      out.grad[y] -= w;
    }
  }
  return out;
}

}  // namespace ldr
