#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>

#include "ldr/numerics.hpp"

namespace ldr {

inline constexpr double kNormEpsilon = 1e-8;

/// Two-layer ReLU network f = W2 relu(W1 x + b1) + b2. Parameters are stored flat as
/// [W1 (h x d, row-major), b1 (h), W2 (K x h, row-major), b2 (K)].
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t d, std::size_t h, std::size_t K);

  /// Kaiming-uniform weights, bound sqrt(6 / fan_in); zero biases. h = 0 picks min(d, K).
  static Mlp kaiming(std::size_t d, std::size_t h, std::size_t K, std::uint64_t seed);

  std::size_t d() const noexcept { return d_; }
  std::size_t h() const noexcept { return h_; }
  std::size_t K() const noexcept { return K_; }
  std::size_t size() const noexcept { return params_.size(); }

  RealVec& params() noexcept { return params_; }
  const RealVec& params() const noexcept { return params_; }

  std::size_t w1() const noexcept { return 0; }
  std::size_t b1() const noexcept { return h_ * d_; }
  std::size_t w2() const noexcept { return h_ * d_ + h_; }
  std::size_t b2() const noexcept { return h_ * d_ + h_ + K_ * h_; }

 private:
  std::size_t d_ = 0, h_ = 0, K_ = 0;
  RealVec params_;
};

/// Intermediates of one forward pass.
struct ForwardCache {
  RealVec hidden;      // relu(W1 x + b1)
  RealVec logits;      // raw f
  RealVec normalized;  // g = K f / ||f||_1, or f itself when normalization is off or bypassed
  double l1 = 0.0;
  bool scaled = false;  // whether g differs from f by the normalization
};

void forward(const Mlp& model, std::span<const double> x, bool normalize, ForwardCache& cache);

/// g = K f / ||f||_1 when ||f||_1 > kNormEpsilon, else g = f. Returns whether scaling happened.
bool normalize_logits(std::span<const double> f, std::span<double> g, double& l1);

/// Maps dL/dg to dL/df through the normalization Jacobian.
void normalization_backward(const ForwardCache& cache, std::span<const double> dL_dg, std::span<double> dL_df);

/// Adds the parameter gradient of a loss with score gradient dL/dg into `grad`.
void backward(const Mlp& model, std::span<const double> x, const ForwardCache& cache, std::span<const double> dL_dg,
              std::span<double> grad);

/// Checkpoint: magic "LDRMLP01", little-endian u64 d, h, K, then the flat parameters.
void save_checkpoint(const Mlp& model, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

}  // namespace ldr
