#include "ldr/experiment.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include "ldr/folds.hpp"
#include "ldr/synthetic.hpp"

namespace ldr {

namespace {

using nlohmann::json;

std::vector<ParamPoint> one_param(const char* key, std::initializer_list<double> values) {
  std::vector<ParamPoint> out;
  for (double v : values) out.push_back({{key, v}});
  return out;
}

template <typename T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

ParamPoint parse_point(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object of numbers");
  ParamPoint p;
  for (const auto& [k, v] : j.items()) {
    if (v.is_number()) {
      p[k] = v.get<double>();
    } else if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "infinity")) {
      p[k] = kInfinity;
    } else {
      throw ConfigError(where + "." + k + " must be a number");
    }
  }
  return p;
}

std::string point_tag(const ParamPoint& p, double lr) {
  std::ostringstream os;
  for (const auto& [k, v] : p) os << k << '=' << v << ';';
  os << "lr=" << lr;
  return os.str();
}

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

// Runs fn(i) for i in [0, n) on `workers` threads; exceptions are rethrown after the join.
template <typename Fn>
void parallel_tasks(std::size_t n, std::size_t workers, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto loop = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::min(workers, n); ++w) pool.emplace_back(loop);
  loop();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

std::vector<ParamPoint> default_grid(const std::string& loss) {
  if (loss == "ldr_kl" || loss == "ldr_k_kl") return one_param("lambda", {0.1, 1.0, 10.0});
  if (loss == "aldr_kl") return one_param("lambda0", {0.1, 1.0, 10.0});
  if (loss == "cs" || loss == "ww") return one_param("c", {0.1, 1.0, 10.0});
  if (loss == "rll") return one_param("alpha", {0.1, 1.0, 10.0});
  if (loss == "gce" || loss == "tgce") return one_param("q", {0.05, 0.7, 0.95});
  if (loss == "sce") return one_param("alpha", {0.05, 0.5, 0.95});
  if (loss == "js") return one_param("pi1", {0.1, 0.5, 0.9});
  if (loss == "nce_rce" || loss == "nce_agce" || loss == "nce_aul")
    return {{{"alpha", 0.1}, {"beta", 9.9}}, {{"alpha", 5.0}, {"beta", 5.0}}, {{"alpha", 9.9}, {"beta", 0.1}}};
  return {ParamPoint{}};
}

std::string NoiseSetting::tag() const {
  if (kind == NoiseKind::none || rate == 0.0) return "clean";
  std::ostringstream os;
  os << noise_kind_name(kind) << rate;
  return os.str();
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{"schema_version", "dataset", "losses", "noise", "seeds", "epochs",
                                           "batch_size", "lr", "milestones", "lr_decay", "weight_decay",
                                           "momentum", "hidden", "normalization", "folds", "test_fraction",
                                           "output_dir", "workers"};
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) throw ConfigError("unknown config field '" + k + "'");

  ExperimentConfig c;
  c.schema_version = field<int>(j, "schema_version", -1);
  if (c.schema_version != kSchemaVersion)
    throw ConfigError("schema_version must be " + std::to_string(kSchemaVersion));

  if (!j.contains("dataset") || !j["dataset"].is_object()) throw ConfigError("config needs a dataset object");
  const json& d = j["dataset"];
  c.dataset.name = field<std::string>(d, "name", "");
  if (c.dataset.name.empty()) throw ConfigError("dataset.name is required");
  for (const auto& f : field<std::vector<std::string>>(d, "files", {})) c.dataset.files.emplace_back(f);
  if (d.contains("cache_dir")) c.dataset.cache_dir = field<std::string>(d, "cache_dir", "");
  c.dataset.n_per_cluster = field<std::size_t>(d, "n_per_cluster", 50);
  c.dataset.seed = field<std::uint64_t>(d, "seed", 0);
  if (c.dataset.files.empty() && c.dataset.name != "synthetic")
    throw ConfigError("dataset.files is required unless dataset.name is \"synthetic\"");

  if (!j.contains("losses") || !j["losses"].is_array() || j["losses"].empty())
    throw ConfigError("config needs a non-empty losses array");
  const auto names = registered_loss_names();
  for (const json& l : j["losses"]) {
    LossGrid g;
    g.name = field<std::string>(l, "name", "");
    if (std::find(names.begin(), names.end(), g.name) == names.end())
      throw ConfigError("unknown loss '" + g.name + "'");
    if (l.contains("params")) g.base = parse_point(l["params"], g.name + ".params");
    if (l.contains("grid")) {
      const json& grid = l["grid"];
      if (grid.is_string() && grid.get<std::string>() == "default") {
        g.points = default_grid(g.name);
      } else if (grid.is_array() && !grid.empty()) {
        for (const json& p : grid) g.points.push_back(parse_point(p, g.name + ".grid"));
      } else {
        throw ConfigError(g.name + ".grid must be \"default\" or a non-empty array");
      }
    } else {
      g.points = {ParamPoint{}};
    }
    for (const ParamPoint& p : g.points) {
      ParamPoint merged = g.base;
      for (const auto& [k, v] : p) merged[k] = v;
      Loss probe(LossSpec{g.name, merged});  // validates names and ranges
    }
    c.losses.push_back(std::move(g));
  }

  if (j.contains("noise")) {
    if (!j["noise"].is_array() || j["noise"].empty()) throw ConfigError("noise must be a non-empty array");
    c.noises.clear();
    for (const json& n : j["noise"]) {
      NoiseSetting s;
      s.kind = noise_kind_from_name(field<std::string>(n, "kind", "none"));
      s.rate = field<double>(n, "rate", 0.0);
      s.rules = field<std::string>(n, "rules", "");
      for (const auto& p : field<std::vector<std::vector<std::size_t>>>(n, "pairs", {})) {
        if (p.size() != 2) throw ConfigError("noise pairs must have two entries");
        s.pairs.emplace_back(p[0], p[1]);
      }
      if (!(s.rate >= 0.0 && s.rate <= 1.0)) throw ConfigError("noise rate must lie in [0, 1]");
      if (s.kind == NoiseKind::pairwise && s.rules.empty() && s.pairs.empty())
        throw ConfigError("pairwise noise needs rules or pairs");
      c.noises.push_back(std::move(s));
    }
  }
  c.seeds = field<std::vector<std::uint64_t>>(j, "seeds", {0});
  if (c.seeds.empty()) throw ConfigError("seeds must be non-empty");

  c.train.epochs = field<std::size_t>(j, "epochs", c.train.epochs);
  c.train.batch_size = field<std::size_t>(j, "batch_size", c.train.batch_size);
  c.train.milestones = field<std::vector<std::size_t>>(j, "milestones", c.train.milestones);
  c.train.lr_decay = field<double>(j, "lr_decay", c.train.lr_decay);
  c.train.weight_decay = field<double>(j, "weight_decay", c.train.weight_decay);
  c.train.momentum = field<double>(j, "momentum", c.train.momentum);
  c.train.hidden = field<std::size_t>(j, "hidden", 0);
  const std::string norm = field<std::string>(j, "normalization", "auto");
  if (norm == "auto") c.train.normalization = Normalization::automatic;
  else if (norm == "on") c.train.normalization = Normalization::on;
  else if (norm == "off") c.train.normalization = Normalization::off;
  else throw ConfigError("normalization must be auto, on or off");
  if (j.contains("lr")) {
    if (j["lr"].is_number()) c.learning_rates = {j["lr"].get<double>()};
    else c.learning_rates = field<std::vector<double>>(j, "lr", {});
  }
  if (c.learning_rates.empty()) throw ConfigError("lr grid must be non-empty");
  for (double lr : c.learning_rates) {
    TrainConfig t = c.train;
    t.lr = lr;
    t.validate();
  }
  c.folds = field<std::size_t>(j, "folds", c.folds);
  if (c.folds < 2) throw ConfigError("folds must be at least 2");
  c.test_fraction = field<double>(j, "test_fraction", c.test_fraction);
  if (!(c.test_fraction >= 0.0 && c.test_fraction < 1.0)) throw ConfigError("test_fraction must lie in [0, 1)");
  c.output_dir = field<std::string>(j, "output_dir", "results");
  c.workers = field<std::size_t>(j, "workers", 0);
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("LDR_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    throw ConfigError("LDR_WORKERS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

Dataset load_dataset(const DatasetSource& source) {
  if (source.files.empty()) {
    if (source.name != "synthetic") throw ConfigError("dataset " + source.name + " has no files");
    return synthetic_gaussians(source.n_per_cluster, source.seed);
  }
  for (const auto& f : source.files)
    if (!std::filesystem::exists(f)) throw ConfigError("dataset file not found: " + f.string());
  return source.cache_dir ? load_libsvm_cached(source.files, *source.cache_dir, source.name)
                          : load_libsvm(source.files, source.name);
}

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string metrics_csv_header() {
  return "schema_version,run_id,fold,epoch,split,top1,top2,top3,top4,top5,mean_loss,lambda_clean,lambda_corrupted\n";
}

std::string metrics_csv_row(const MetricRecord& r) {
  std::ostringstream os;
  os << kSchemaVersion << ',' << csv_quote(r.run_id) << ',' << r.fold << ',' << r.epoch << ',' << r.split;
  for (double v : r.topk) os << ',' << format_number(v);
  os << ',' << format_number(r.mean_loss) << ',' << format_number(r.lambda_clean) << ','
     << format_number(r.lambda_corrupted) << '\n';
  return os.str();
}

std::vector<CvResult> run_experiment(const ExperimentConfig& config, const Dataset& data) {
  data.validate();
  const std::size_t workers = resolve_workers(config.workers);
  // Nested OpenMP inside many workers would oversubscribe; one worker keeps the kernels parallel.
  const Exec exec = workers > 1 ? Exec::serial : Exec::parallel;

  struct Cell {
    std::size_t loss, noise, seed;
  };
  std::vector<Cell> cells;
  for (std::size_t l = 0; l < config.losses.size(); ++l)
    for (std::size_t n = 0; n < config.noises.size(); ++n)
      for (std::size_t s = 0; s < config.seeds.size(); ++s) cells.push_back({l, n, s});

  // Per (noise, seed): fold plan and noisy labels shared by every loss.
  struct Prepared {
    FoldPlan plan;
    Dataset noisy;  // the full dataset with noise applied outside the test rows
    std::vector<char> corrupted;
  };
  std::map<std::pair<std::size_t, std::size_t>, Prepared> prepared;
  for (std::size_t n = 0; n < config.noises.size(); ++n) {
    for (std::size_t s = 0; s < config.seeds.size(); ++s) {
      const std::uint64_t seed = config.seeds[s];
      Prepared p;
      p.plan = make_folds(data.n, config.test_fraction, config.folds, data.labels, seed);
      const NoiseSetting& ns = config.noises[n];
      NoiseSpec spec{ns.kind, ns.rate, ns.pairs, seed * 7919 + n + 1};
      if (ns.kind == NoiseKind::pairwise && !ns.rules.empty()) spec.pairs = resolve_flip_pairs(ns.rules, data);
      const NoisyLabels noisy = inject_noise(data.labels, data.K, spec);
      p.noisy = data;
      p.corrupted.assign(data.n, 0);
      for (std::size_t i = 0; i < data.n; ++i) {
        if (p.plan.fold[i] < 0) continue;  // test rows stay clean
        p.noisy.labels[i] = noisy.labels[i];
        p.corrupted[i] = noisy.corrupted[i];
      }
      prepared.emplace(std::make_pair(n, s), std::move(p));
    }
  }

  // Every (cell, grid point, lr, fold) is an isolated task.
  struct Task {
    std::size_t cell, point, lr, fold;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (std::size_t p = 0; p < config.losses[cells[c].loss].points.size(); ++p)
      for (std::size_t r = 0; r < config.learning_rates.size(); ++r)
        for (std::size_t f = 0; f < config.folds; ++f) tasks.push_back({c, p, r, f});

  struct TaskOutcome {
    double val_top1 = 0.0;
    TopkVector test{};
    double lambda_clean = kNotApplicable, lambda_corrupted = kNotApplicable;
    std::vector<MetricRecord> records;
  };
  std::vector<TaskOutcome> outcomes(tasks.size());

  parallel_tasks(tasks.size(), workers, [&](std::size_t t) {
    const Task& task = tasks[t];
    const Cell& cell = cells[task.cell];
    const LossGrid& grid = config.losses[cell.loss];
    ParamPoint params = grid.base;
    for (const auto& [k, v] : grid.points[task.point]) params[k] = v;
    const Loss loss(LossSpec{grid.name, params});
    const Prepared& prep = prepared.at({cell.noise, cell.seed});
    const auto train_idx = prep.plan.training_indices(task.fold);
    const auto val_idx = prep.plan.validation_indices(task.fold);
    const auto test_idx = prep.plan.test_indices();
    const Dataset train_set = subset(prep.noisy, train_idx);
    const Dataset val_set = subset(prep.noisy, val_idx);
    const Dataset test_set = subset(prep.noisy, test_idx);
    TrainSplits splits;
    splits.train = &train_set;
    splits.val = val_idx.empty() ? nullptr : &val_set;
    splits.test = test_idx.empty() ? nullptr : &test_set;
    for (std::size_t i : train_idx) splits.corrupted.push_back(prep.corrupted[i]);

    TrainConfig tc = config.train;
    tc.lr = config.learning_rates[task.lr];
    tc.seed = config.seeds[cell.seed] * 1000003 + task.fold;
    tc.exec = exec;
    TrainOptions opts;
    opts.run_id = point_tag(grid.points[task.point], tc.lr);
    opts.fold = static_cast<int>(task.fold);
    const TrainRunReport report = train(tc, loss, splits, opts);

    TaskOutcome& out = outcomes[t];
    out.val_top1 = report.best_val_top1;
    const std::size_t pick = report.best_epoch ? report.best_epoch : tc.epochs;
    for (const MetricRecord& r : report.records) {
      if (r.epoch == pick && r.split == "test") out.test = r.topk;
      if (r.epoch == tc.epochs && r.split == "train") {
        out.lambda_clean = r.lambda_clean;
        out.lambda_corrupted = r.lambda_corrupted;
      }
    }
    out.records = report.records;
  });

  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + config.output_dir.string());

  std::vector<CvResult> results;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const Cell& cell = cells[c];
    const LossGrid& grid = config.losses[cell.loss];
    CvResult res;
    res.dataset = data.name.empty() ? config.dataset.name : data.name;
    res.loss = grid.name;
    res.noise = config.noises[cell.noise].tag();
    res.seed = config.seeds[cell.seed];

    // Grid selection by mean validation top-1 across folds; the first point wins ties.
    double best = -1.0;
    std::size_t best_p = 0, best_r = 0;
    for (std::size_t p = 0; p < grid.points.size(); ++p) {
      for (std::size_t r = 0; r < config.learning_rates.size(); ++r) {
        double mean = 0.0;
        for (std::size_t t = 0; t < tasks.size(); ++t)
          if (tasks[t].cell == c && tasks[t].point == p && tasks[t].lr == r) mean += outcomes[t].val_top1;
        mean /= static_cast<double>(config.folds);
        if (mean > best) {
          best = mean;
          best_p = p;
          best_r = r;
        }
      }
    }
    res.params = grid.base;
    for (const auto& [k, v] : grid.points[best_p]) res.params[k] = v;
    res.lr = config.learning_rates[best_r];
    res.val_top1 = best;

    std::vector<TopkVector> per_fold;
    double lc = 0.0, ln = 0.0;
    std::size_t nc = 0, nn = 0;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      if (tasks[t].cell != c) continue;
      for (const auto& r : outcomes[t].records) res.records.push_back(r);
      if (tasks[t].point != best_p || tasks[t].lr != best_r) continue;
      per_fold.push_back(outcomes[t].test);
      if (!std::isnan(outcomes[t].lambda_clean)) {
        lc += outcomes[t].lambda_clean;
        ++nc;
      }
      if (!std::isnan(outcomes[t].lambda_corrupted)) {
        ln += outcomes[t].lambda_corrupted;
        ++nn;
      }
    }
    if (nc) res.lambda_clean = lc / static_cast<double>(nc);
    if (nn) res.lambda_corrupted = ln / static_cast<double>(nn);
    const double F = static_cast<double>(per_fold.size());
    for (std::size_t k = 0; k < kMaxReportedK; ++k) {
      double m = 0.0, v = 0.0;
      for (const auto& tk : per_fold) m += tk[k];
      m /= F;
      for (const auto& tk : per_fold) v += (tk[k] - m) * (tk[k] - m);
      res.test_mean[k] = m;
      res.test_std[k] = F > 1 ? std::sqrt(v / (F - 1.0)) : 0.0;
    }

    std::ostringstream csv;
    csv << metrics_csv_header();
    for (const auto& r : res.records) csv << metrics_csv_row(r);
    write_text(config.output_dir / (res.dataset + "_" + res.loss + "_" + res.noise + "_" + std::to_string(res.seed) + ".csv"),
               csv.str());
    results.push_back(std::move(res));
  }
  return results;
}

std::vector<LeaderboardRow> leaderboard_from(const std::vector<CvResult>& results) {
  LeaderboardInput input;
  for (const CvResult& r : results) {
    const std::string cell = r.dataset + "/" + r.noise + "/" + std::to_string(r.seed);
    input[r.loss][cell] = std::vector<double>(r.test_mean.begin(), r.test_mean.end());
  }
  return leaderboard(input);
}

std::string leaderboard_csv(const std::vector<LeaderboardRow>& rows) {
  std::ostringstream os;
  os << "schema_version,loss";
  if (!rows.empty())
    for (std::size_t k = 1; k <= rows.front().mean_rank_per_k.size(); ++k) os << ",rank_top" << k;
  os << ",overall\n";
  for (const auto& row : rows) {
    os << kSchemaVersion << ',' << csv_quote(row.loss);
    for (double v : row.mean_rank_per_k) os << ',' << format_number(v);
    os << ',' << format_number(row.overall) << '\n';
  }
  return os.str();
}

SynthReport run_synthetic_protocol(const SynthConfig& config) {
  Dataset data = synthetic_gaussians(config.n_per_cluster, config.seed);
  const Loss ce(LossSpec{"ce", {}});
  TrainConfig pre;
  pre.epochs = config.pretrain_epochs;
  pre.lr = config.lr;
  pre.milestones = {};
  pre.weight_decay = config.weight_decay;
  pre.hidden = config.hidden;
  pre.seed = config.seed;
  pre.exec = Exec::serial;
  pre.normalization = Normalization::off;
  pre.evaluate_every_epoch = false;
  TrainSplits splits;
  splits.train = &data;
  const TrainRunReport pretrained = train(pre, ce, splits);

  SynthReport report;
  report.pretrain_accuracy = pretrained.records.back().topk[0];
  report.grid_pretrained = decision_grid(pretrained.final_model, config.bounds, config.grid_resolution);

  const std::size_t clean = append_probe(data, config.clean.x0, config.clean.x1, config.clean.label);
  const std::size_t noisy = append_probe(data, config.mislabeled.x0, config.mislabeled.x1, config.mislabeled.label);
  splits.train = &data;
  splits.corrupted.assign(data.n, 0);
  splits.corrupted[noisy] = 1;

  TrainConfig fine = pre;
  fine.epochs = config.finetune_epochs;
  TrainOptions opts;
  opts.initial = pretrained.final_model;

  const Loss aldr(LossSpec{"aldr_kl", {{"lambda0", config.lambda0}, {"alpha", config.alpha}}});
  const TrainRunReport adaptive = train(fine, aldr, splits, opts);
  report.lambda_clean_probe = adaptive.lambdas[clean];
  report.lambda_mislabeled_probe = adaptive.lambdas[noisy];
  double rest = 0.0;
  for (std::size_t i = 0; i < data.n; ++i)
    if (!data.probe[i]) rest += adaptive.lambdas[i];
  report.lambda_mean_rest = rest / static_cast<double>(data.n - 2);
  report.grid_aldr = decision_grid(adaptive.final_model, config.bounds, config.grid_resolution);

  const TrainRunReport plain = train(fine, ce, splits, opts);
  report.grid_ce = decision_grid(plain.final_model, config.bounds, config.grid_resolution);
  return report;
}

std::string decision_grids_csv(const SynthReport& report, std::size_t resolution) {
  std::ostringstream os;
  os << "schema_version,model,row,col,class\n";
  auto emit = [&](const char* name, const std::vector<std::size_t>& grid) {
    for (std::size_t r = 0; r < resolution; ++r)
      for (std::size_t c = 0; c < resolution; ++c)
        os << kSchemaVersion << ',' << name << ',' << r << ',' << c << ',' << grid[r * resolution + c] << '\n';
  };
  emit("pretrained", report.grid_pretrained);
  emit("ce", report.grid_ce);
  emit("aldr_kl", report.grid_aldr);
  return os.str();
}

}  // namespace ldr
