#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ldr/metrics.hpp"
#include "ldr/noise.hpp"
#include "ldr/trainer.hpp"

namespace ldr {

inline constexpr int kSchemaVersion = 1;

using ParamPoint = std::map<std::string, double>;

/// Hyperparameter points searched for a loss by default: lambda or lambda0 in {0.1, 1, 10},
/// CS/WW margin, RLL alpha and JS pi1 in their three-point grids, GCE/TGCE q in
/// {0.05, 0.7, 0.95}, SCE alpha in {0.05, 0.5, 0.95}, and coupled alpha/beta pairs for NCE+X.
std::vector<ParamPoint> default_grid(const std::string& loss);

inline const std::vector<double> kDefaultLearningRates{0.1, 0.01, 0.001};

struct DatasetSource {
  std::string name;
  std::vector<std::filesystem::path> files;  // LIBSVM; empty with name "synthetic"
  std::optional<std::filesystem::path> cache_dir;
  std::size_t n_per_cluster = 50;  // synthetic only
  std::uint64_t seed = 0;          // synthetic only
};

struct LossGrid {
  std::string name;
  ParamPoint base;                // fixed parameters
  std::vector<ParamPoint> points; // merged over `base`; one empty point when nothing is tuned
};

struct NoiseSetting {
  NoiseKind kind = NoiseKind::none;
  double rate = 0.0;
  std::string rules;               // builtin pairwise rule table name
  std::vector<ClassPair> pairs;    // explicit pairwise pairs

  /// e.g. "uniform0.3", "clean".
  std::string tag() const;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  DatasetSource dataset;
  std::vector<LossGrid> losses;
  std::vector<NoiseSetting> noises{NoiseSetting{}};
  std::vector<std::uint64_t> seeds{0};
  TrainConfig train;
  std::vector<double> learning_rates = kDefaultLearningRates;
  std::size_t folds = 5;
  double test_fraction = 0.1;
  std::filesystem::path output_dir = "results";
  std::size_t workers = 0;  // 0: LDR_WORKERS, else hardware concurrency
};

/// Parses and validates a JSON config. Every problem is reported as ConfigError.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Resolves the worker count: explicit value, then the LDR_WORKERS variable, then hardware.
std::size_t resolve_workers(std::size_t requested);

Dataset load_dataset(const DatasetSource& source);

/// Cross-validated outcome of one (loss, noise, seed) cell.
struct CvResult {
  std::string dataset, loss, noise;
  std::uint64_t seed = 0;
  ParamPoint params;  // selected point
  double lr = 0.0;    // selected learning rate
  double val_top1 = 0.0;
  TopkVector test_mean{}, test_std{};  // across folds, each at its best validation epoch
  double lambda_clean = kNotApplicable;      // final-epoch training means, averaged over folds
  double lambda_corrupted = kNotApplicable;
  std::vector<MetricRecord> records;  // every grid point and fold
};

/// Runs every loss x noise x seed cell with grid search over folds, writing
/// `<dataset>_<loss>_<noise>_<seed>.csv` per cell into the output directory.
std::vector<CvResult> run_experiment(const ExperimentConfig& config, const Dataset& data);

/// CSV header shared by all metric files.
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricRecord& r);
std::string csv_quote(const std::string& field);

/// Leaderboard over test top-k means; cells are noise settings (and seeds).
std::vector<LeaderboardRow> leaderboard_from(const std::vector<CvResult>& results);
std::string leaderboard_csv(const std::vector<LeaderboardRow>& rows);

/// The two-probe synthetic protocol: CE pretraining, then ALDR-KL and CE finetuning with one
/// clean probe and one mislabeled probe appended.
struct ProbeSpec {
  double x0, x1;
  std::size_t label;
};

struct SynthConfig {
  std::size_t n_per_cluster = 50;
  std::uint64_t seed = 1;
  std::size_t hidden = 32;
  std::size_t pretrain_epochs = 1000;
  std::size_t finetune_epochs = 100;
  double lr = 0.01;
  double weight_decay = 5e-3;
  double lambda0 = 10.0;
  double alpha = 0.05;
  ProbeSpec clean{0.7, 0.15, 0};
  ProbeSpec mislabeled{0.9, 0.15, 1};
  std::size_t grid_resolution = 100;
  GridBounds bounds{-2.0, 2.0, -2.0, 2.0};
};

struct SynthReport {
  double lambda_clean_probe = 0.0;
  double lambda_mislabeled_probe = 0.0;
  double lambda_mean_rest = 0.0;
  double pretrain_accuracy = 0.0;
  std::vector<std::size_t> grid_pretrained, grid_ce, grid_aldr;
};

SynthReport run_synthetic_protocol(const SynthConfig& config);

/// Long-format CSV: schema_version,model,row,col,class.
std::string decision_grids_csv(const SynthReport& report, std::size_t resolution);

}  // namespace ldr
