#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "ldr/errors.hpp"

namespace ldr {

using RealVec = std::vector<double>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Throws DomainError unless every entry of `u` is finite.
void require_finite(std::span<const double> u, const char* what);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax_lowest(std::span<const double> u);

/// scale * log((1/K) * sum_k exp(u_k / scale)), evaluated with a max shift.
double log_sum_exp(std::span<const double> u, double scale);

/// p_k = exp(u_k / scale) / sum_j exp(u_j / scale).
RealVec tempered_softmax(std::span<const double> u, double scale);
void tempered_softmax(std::span<const double> u, double scale, std::span<double> out);

/// KL(p || uniform) = sum_k p_k log(K p_k), with 0 log 0 = 0.
double kl_to_uniform(std::span<const double> p);

using ScalarFn = std::function<double(std::span<const double>)>;

inline constexpr double kDefaultFiniteDiffStep = 1e-5;

/// Central-difference gradient of `fun` at `x`.
RealVec finite_diff_grad(const ScalarFn& fun, std::span<const double> x,
                         double h = kDefaultFiniteDiffStep);

/// ||a - b||_2 / max(||a||_2, ||b||_2, floor). The floor keeps the ratio
/// meaningful when both gradients vanish.
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-4);

}  // namespace ldr
