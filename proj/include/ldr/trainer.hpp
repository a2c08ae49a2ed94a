#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldr/batch_kernels.hpp"
#include "ldr/dataset.hpp"
#include "ldr/loss_registry.hpp"
#include "ldr/metrics.hpp"
#include "ldr/mlp.hpp"

namespace ldr {

enum class Normalization { automatic, on, off };  // automatic: on for the LDR family

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double lr = 0.1;
  std::vector<std::size_t> milestones{50, 75};  // lr shrinks after these epochs
  double lr_decay = 0.1;
  double weight_decay = 5e-3;
  double momentum = 0.9;
  std::size_t hidden = 0;  // 0: min(d, K)
  std::uint64_t seed = 0;
  Normalization normalization = Normalization::automatic;
  Exec exec = Exec::parallel;
  bool evaluate_every_epoch = true;

  /// Throws ConfigError on a non-positive size, rate or an out-of-range momentum.
  void validate() const;
};

/// Learning rate in effect during 1-based `epoch`.
double learning_rate_at(const TrainConfig& config, std::size_t epoch);

inline constexpr double kNotApplicable = std::numeric_limits<double>::quiet_NaN();

struct MetricRecord {
  std::string run_id;
  int fold = -1;
  std::size_t epoch = 0;
  std::string split;  // train, val or test
  TopkVector topk{};
  double mean_loss = 0.0;
  double lambda_clean = kNotApplicable;
  double lambda_corrupted = kNotApplicable;
};

/// Training rows carry possibly noisy labels; `corrupted` marks rows whose label was changed.
struct TrainSplits {
  const Dataset* train = nullptr;
  std::vector<char> corrupted;     // empty: nothing corrupted
  const Dataset* val = nullptr;    // optional
  const Dataset* test = nullptr;   // optional
};

struct TrainRunReport {
  std::vector<MetricRecord> records;
  std::size_t best_epoch = 0;  // 0 when there is no validation split
  double best_val_top1 = -1.0;
  Mlp best_model;
  Mlp final_model;
  RealVec lambdas;  // final per-row lambda (adaptive losses only)
  double lambda_min_seen = kNotApplicable;
  double lambda_max_seen = kNotApplicable;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t epoch, std::size_t batch, double value);
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_, batch_;
};

/// Called after every epoch with the per-row lambda state (empty for stateless losses).
using EpochHook = std::function<void(std::size_t epoch, const Mlp& model, std::span<const double> lambdas)>;

struct TrainOptions {
  std::string run_id;
  int fold = -1;
  std::optional<Mlp> initial;                 // start from these weights instead of a fresh init
  std::optional<RealVec> initial_lambdas;     // carry lambda state over (adaptive losses)
  EpochHook on_epoch;
};

/// Mini-batch momentum training: m = beta m + (1 - beta)(G + wd w), w -= lr m.
TrainRunReport train(const TrainConfig& config, const Loss& loss, const TrainSplits& splits,
                     const TrainOptions& options = {});

bool normalization_enabled(Normalization mode, const Loss& loss);

/// Arg-max class over an r x r grid of cell centers spanning [x0, x1] x [y0, y1]; row-major
/// with the first coordinate varying fastest.
struct GridBounds {
  double x0 = -2.0, x1 = 2.0, y0 = -2.0, y1 = 2.0;
};
std::vector<std::size_t> decision_grid(const Mlp& model, const GridBounds& bounds, std::size_t resolution);

}  // namespace ldr
