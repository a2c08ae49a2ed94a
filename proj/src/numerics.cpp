#include "ldr/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ldr {

void require_finite(std::span<const double> u, const char* what) {
  for (double v : u) {
    if (!std::isfinite(v)) {
      throw DomainError(std::string(what) + ": non-finite input");
    }
  }
}

std::size_t argmax_lowest(std::span<const double> u) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < u.size(); ++k) {
    if (u[k] > u[best]) best = k;
  }
  return best;
}

double log_sum_exp(std::span<const double> u, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("log_sum_exp: scale must be positive");
  if (u.empty()) throw DomainError("log_sum_exp: empty input");
  require_finite(u, "log_sum_exp");
  const double m = *std::max_element(u.begin(), u.end());
  double acc = 0.0;
  for (double v : u) acc += std::exp((v - m) / scale);
  return m + scale * (std::log(acc) - std::log(static_cast<double>(u.size())));
}

void tempered_softmax(std::span<const double> u, double scale, std::span<double> out) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("tempered_softmax: scale must be positive");
  if (u.empty() || out.size() != u.size()) throw DomainError("tempered_softmax: size mismatch");
  require_finite(u, "tempered_softmax");
  const double m = *std::max_element(u.begin(), u.end());
  double total = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    out[k] = std::exp((u[k] - m) / scale);
    total += out[k];
  }
  for (double& v : out) v /= total;
}

RealVec tempered_softmax(std::span<const double> u, double scale) {
  RealVec p(u.size());
  tempered_softmax(u, scale, p);
  return p;
}

double kl_to_uniform(std::span<const double> p) {
  const double K = static_cast<double>(p.size());
  double kl = 0.0, mass = 0.0;
  for (double v : p) {
    if (v < 0.0 || !std::isfinite(v)) throw DomainError("kl_to_uniform: entries must be non-negative");
    if (v > 0.0) kl += v * std::log(v * K);
    mass += v;
  }
  if (std::abs(mass - 1.0) > 1e-9) throw DomainError("kl_to_uniform: p must lie on the simplex");
  // Rounding can leave a tiny negative value near the uniform vector.
  return std::max(kl, 0.0);
}

RealVec finite_diff_grad(const ScalarFn& fun, std::span<const double> x, double h) {
  RealVec probe(x.begin(), x.end());
  RealVec grad(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    probe[k] = x[k] + h;
    const double up = fun(probe);
    probe[k] = x[k] - h;
    const double down = fun(probe);
    probe[k] = x[k];
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    diff += (a[k] - b[k]) * (a[k] - b[k]);
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

}  // namespace ldr
