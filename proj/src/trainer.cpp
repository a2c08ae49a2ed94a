#include "ldr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace ldr {

namespace {

std::string diverged_message(std::size_t epoch, std::size_t batch, double value) {
  std::ostringstream os;
  os << "training diverged at epoch " << epoch << ", batch " << batch << ": loss " << value;
  return os.str();
}

MetricRecord evaluate_split(const Mlp& model, const Dataset& data, const Loss& loss, bool normalize, Exec exec,
                            const char* split) {
  MetricRecord r;
  r.split = split;
  const RealVec scores = predict_scores(model, data.features, normalize, exec);
  r.topk = topk_profile(scores, data.labels, data.K);
  r.mean_loss = mean_loss(model, data.features, data.labels, loss, normalize, exec);
  return r;
}

}  // namespace

TrainingDiverged::TrainingDiverged(std::size_t epoch, std::size_t batch, double value)
    : std::runtime_error(diverged_message(epoch, batch, value)), epoch_(epoch), batch_(batch) {}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (!(lr_decay > 0.0)) throw ConfigError("lr decay must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
}

double learning_rate_at(const TrainConfig& config, std::size_t epoch) {
  double lr = config.lr;
  for (std::size_t m : config.milestones)
    if (epoch > m) lr *= config.lr_decay;
  return lr;
}

bool normalization_enabled(Normalization mode, const Loss& loss) {
  switch (mode) {
    case Normalization::on: return true;
    case Normalization::off: return false;
    case Normalization::automatic: return loss.uses_normalized_logits();
  }
  return false;
}

TrainRunReport train(const TrainConfig& config, const Loss& loss, const TrainSplits& splits,
                     const TrainOptions& options) {
  config.validate();
  if (!splits.train) throw ConfigError("no training split");
  const Dataset& tr = *splits.train;
  tr.validate();
  if (!splits.corrupted.empty() && splits.corrupted.size() != tr.n) throw ConfigError("corrupted mask length mismatch");
  const bool normalize = normalization_enabled(config.normalization, loss);
  const bool adaptive = loss.is_adaptive();

  Mlp model = options.initial ? *options.initial : Mlp::kaiming(tr.d, config.hidden, tr.K, config.seed);
  if (model.d() != tr.d || model.K() != tr.K) throw ConfigError("initial model shape does not match the data");
  RealVec velocity(model.size(), 0.0);

  TrainRunReport report;
  if (adaptive) {
    const double lambda0 = loss.aldr_params(tr.K).lambda0;
    report.lambdas = options.initial_lambdas ? *options.initial_lambdas : RealVec(tr.n, lambda0);
    if (report.lambdas.size() != tr.n) throw ConfigError("initial lambda state length mismatch");
    report.lambda_min_seen = *std::min_element(report.lambdas.begin(), report.lambdas.end());
    report.lambda_max_seen = *std::max_element(report.lambdas.begin(), report.lambdas.end());
  }

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(tr.n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = learning_rate_at(config, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < tr.n; start += config.batch_size, ++batch_no) {
      const std::size_t stop = std::min(tr.n, start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      BatchResult br = batch_loss_gradient(model, tr.features, tr.labels, idx, loss, normalize, report.lambdas,
                                           config.exec);
      if (br.first_nonfinite != static_cast<std::size_t>(-1) || !std::isfinite(br.loss_sum))
        throw TrainingDiverged(epoch, batch_no, br.loss_sum);
      loss_sum += br.loss_sum;
      const double inv_b = 1.0 / static_cast<double>(idx.size());
      RealVec& w = model.params();
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double g = br.grad[j] * inv_b + config.weight_decay * w[j];
        velocity[j] = config.momentum * velocity[j] + (1.0 - config.momentum) * g;
        w[j] -= lr * velocity[j];
      }
      if (adaptive) {
        for (std::size_t i : idx) {
          report.lambda_min_seen = std::min(report.lambda_min_seen, report.lambdas[i]);
          report.lambda_max_seen = std::max(report.lambda_max_seen, report.lambdas[i]);
        }
      }
    }

    MetricRecord train_rec;
    train_rec.split = "train";
    train_rec.mean_loss = loss_sum / static_cast<double>(tr.n);
    if (adaptive) {
      double clean = 0.0, noisy = 0.0;
      std::size_t n_clean = 0, n_noisy = 0;
      for (std::size_t i = 0; i < tr.n; ++i) {
        if (!splits.corrupted.empty() && splits.corrupted[i]) {
          noisy += report.lambdas[i];
          ++n_noisy;
        } else {
          clean += report.lambdas[i];
          ++n_clean;
        }
      }
      if (n_clean) train_rec.lambda_clean = clean / static_cast<double>(n_clean);
      if (n_noisy) train_rec.lambda_corrupted = noisy / static_cast<double>(n_noisy);
    }
    const bool last = epoch == config.epochs;
    if (config.evaluate_every_epoch || last) {
      train_rec.topk = topk_profile(predict_scores(model, tr.features, normalize, config.exec), tr.labels, tr.K);
    }
    std::vector<MetricRecord> epoch_records{train_rec};
    if (splits.val && (config.evaluate_every_epoch || last)) {
      MetricRecord v = evaluate_split(model, *splits.val, loss, normalize, config.exec, "val");
      if (v.topk[0] > report.best_val_top1) {
        report.best_val_top1 = v.topk[0];
        report.best_epoch = epoch;
        report.best_model = model;
      }
      epoch_records.push_back(v);
    }
    if (splits.test && (config.evaluate_every_epoch || last))
      epoch_records.push_back(evaluate_split(model, *splits.test, loss, normalize, config.exec, "test"));
    for (auto& r : epoch_records) {
      r.run_id = options.run_id;
      r.fold = options.fold;
      r.epoch = epoch;
      report.records.push_back(std::move(r));
    }
    if (options.on_epoch) options.on_epoch(epoch, model, report.lambdas);
  }
  report.final_model = model;
  if (!splits.val) report.best_model = model;
  return report;
}

std::vector<std::size_t> decision_grid(const Mlp& model, const GridBounds& bounds, std::size_t resolution) {
  if (model.d() != 2) throw ConfigError("decision_grid needs a 2-D model");
  if (resolution == 0) throw ConfigError("grid resolution must be positive");
  std::vector<std::size_t> grid(resolution * resolution);
  ForwardCache cache;
  const double dx = (bounds.x1 - bounds.x0) / static_cast<double>(resolution);
  const double dy = (bounds.y1 - bounds.y0) / static_cast<double>(resolution);
  for (std::size_t r = 0; r < resolution; ++r) {
    for (std::size_t c = 0; c < resolution; ++c) {
      const double x[2] = {bounds.x0 + (static_cast<double>(c) + 0.5) * dx,
                           bounds.y0 + (static_cast<double>(r) + 0.5) * dy};
      forward(model, x, false, cache);
      grid[r * resolution + c] = argmax_lowest(cache.logits);
    }
  }
  return grid;
}

}  // namespace ldr
