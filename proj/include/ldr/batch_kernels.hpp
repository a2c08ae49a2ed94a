#pragma once

#include <cstddef>
#include <span>

#include "ldr/dataset.hpp"
#include "ldr/loss_registry.hpp"
#include "ldr/mlp.hpp"

namespace ldr {

/// serial is the reference; parallel spreads fixed-size sample chunks over OpenMP threads. Both
/// produce bitwise-identical results since chunk boundaries and reduction order never depend on
/// the thread count.
enum class Exec { serial, parallel };

struct BatchResult {
  double loss_sum = 0.0;
  RealVec grad;  // summed (not averaged) parameter gradient
  std::size_t first_nonfinite = static_cast<std::size_t>(-1);  // batch position of the first NaN/inf loss
};

/// Loss and parameter gradient over rows `idx` of `features` (row-major, model.d() columns)
/// with labels `labels[idx[b]]`. For adaptive losses `lambdas[idx[b]]` is read and advanced.
BatchResult batch_loss_gradient(const Mlp& model, std::span<const double> features, std::span<const std::size_t> labels,
                                std::span<const std::size_t> idx, const Loss& loss, bool normalize,
                                std::span<double> lambdas, Exec exec);

/// Scores for every row: normalized logits when `normalize`, raw logits otherwise.
RealVec predict_scores(const Mlp& model, std::span<const double> features, bool normalize, Exec exec);

/// Per-row loss values without gradients, for reporting.
double mean_loss(const Mlp& model, std::span<const double> features, std::span<const std::size_t> labels,
                 const Loss& loss, bool normalize, Exec exec);

/// Number of OpenMP threads the parallel path would use (1 without OpenMP).
int parallel_threads();

}  // namespace ldr
