#include "ldr/batch_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#ifdef LDR_HAVE_OPENMP
#include <omp.h>
#endif

namespace ldr {

namespace {

// Samples are grouped into fixed chunks independent of the thread count. Each chunk sums its
// samples in order into one buffer and chunks are reduced in order, so every execution mode
// performs the same floating-point operations.
constexpr std::size_t kChunk = 16;

// Adds the sample's parameter gradient into `grad` and returns its loss (NaN when the scores are
// not finite, in which case nothing is added).
double sample_gradient(const Mlp& model, std::span<const double> x, std::size_t y, const Loss& loss, bool normalize,
                       double* lambda, ForwardCache& cache, std::span<double> grad) {
  forward(model, x, normalize, cache);
  for (double v : cache.normalized)
    if (!std::isfinite(v)) return std::numeric_limits<double>::quiet_NaN();
  const LossGrad lg = lambda ? loss.adaptive_step(cache.normalized, y, *lambda) : loss.evaluate(cache.normalized, y);
  if (std::isfinite(lg.value)) backward(model, x, cache, lg.grad, grad);
  return lg.value;
}

}  // namespace

int parallel_threads() {
#ifdef LDR_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

BatchResult batch_loss_gradient(const Mlp& model, std::span<const double> features, std::span<const std::size_t> labels,
                                std::span<const std::size_t> idx, const Loss& loss, bool normalize,
                                std::span<double> lambdas, Exec exec) {
  const std::size_t B = idx.size(), P = model.size(), d = model.d();
  const bool adaptive = loss.is_adaptive();
  if (adaptive && lambdas.size() < labels.size()) throw DomainError("adaptive loss needs one lambda per row");
  const std::size_t chunks = (B + kChunk - 1) / kChunk;
  RealVec partial(chunks * P, 0.0);
  RealVec values(B);

  auto run_chunk = [&](std::size_t c, ForwardCache& cache) {
    const auto grad = std::span<double>(partial).subspan(c * P, P);
    for (std::size_t b = c * kChunk; b < std::min(B, (c + 1) * kChunk); ++b) {
      const std::size_t i = idx[b];
      values[b] = sample_gradient(model, features.subspan(i * d, d), labels[i], loss, normalize,
                                  adaptive ? &lambdas[i] : nullptr, cache, grad);
    }
  };

  if (exec == Exec::parallel) {
#pragma omp parallel
    {
      ForwardCache cache;
#pragma omp for schedule(static)
      for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) run_chunk(static_cast<std::size_t>(c), cache);
    }
  } else {
    ForwardCache cache;
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c, cache);
  }

  BatchResult out;
  out.grad.assign(P, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    if (!std::isfinite(values[b]) && out.first_nonfinite == static_cast<std::size_t>(-1)) out.first_nonfinite = b;
    out.loss_sum += values[b];
  }
  for (std::size_t c = 0; c < chunks; ++c) {
    const double* src = partial.data() + c * P;
    for (std::size_t j = 0; j < P; ++j) out.grad[j] += src[j];
  }
  return out;
}

RealVec predict_scores(const Mlp& model, std::span<const double> features, bool normalize, Exec exec) {
  const std::size_t d = model.d(), K = model.K();
  const std::size_t n = features.size() / d;
  RealVec scores(n * K);
  auto run = [&](std::size_t i, ForwardCache& cache) {
    forward(model, features.subspan(i * d, d), normalize, cache);
    std::copy(cache.normalized.begin(), cache.normalized.end(), scores.begin() + static_cast<std::ptrdiff_t>(i * K));
  };
  if (exec == Exec::parallel) {
#pragma omp parallel
    {
      ForwardCache cache;
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) run(static_cast<std::size_t>(i), cache);
    }
  } else {
    ForwardCache cache;
    for (std::size_t i = 0; i < n; ++i) run(i, cache);
  }
  return scores;
}

double mean_loss(const Mlp& model, std::span<const double> features, std::span<const std::size_t> labels,
                 const Loss& loss, bool normalize, Exec exec) {
  const std::size_t K = model.K(), n = labels.size();
  if (n == 0) return 0.0;
  const RealVec scores = predict_scores(model, features, normalize, exec);
  RealVec values(n);
  auto run = [&](std::size_t i) {
    const auto row = std::span<const double>(scores).subspan(i * K, K);
    const bool finite = std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); });
    values[i] = finite ? loss.evaluate(row, labels[i]).value : std::numeric_limits<double>::quiet_NaN();
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) run(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) run(i);
  }
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(n);
}

}  // namespace ldr
