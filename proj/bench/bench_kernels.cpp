#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "ldr/batch_kernels.hpp"
#include "ldr/topk_dro.hpp"

using namespace ldr;

namespace {

struct Workload {
  std::size_t n, d = 32, K = 26;
  RealVec features;
  std::vector<std::size_t> labels, idx;
  Mlp model;

  explicit Workload(std::size_t rows) : n(rows) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal;
    features.resize(n * d);
    for (double& v : features) v = normal(rng);
    labels.resize(n);
    for (auto& y : labels) y = rng() % K;
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    model = Mlp::kaiming(d, 64, K, 2);
  }
};

void batch_gradient(benchmark::State& state, const char* loss_name, Exec exec) {
  const Workload w(static_cast<std::size_t>(state.range(0)));
  const Loss loss(LossSpec{loss_name, {}});
  RealVec lambdas(w.n, 1.0);
  for (auto _ : state) {
    auto r = batch_loss_gradient(w.model, w.features, w.labels, w.idx, loss, loss.uses_normalized_logits(), lambdas,
                                 exec);
    benchmark::DoNotOptimize(r.loss_sum);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.counters["threads"] = exec == Exec::parallel ? parallel_threads() : 1;
}

void scores(benchmark::State& state, Exec exec) {
  const Workload w(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto s = predict_scores(w.model, w.features, true, exec);
    benchmark::DoNotOptimize(s.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void capped_simplex(benchmark::State& state) {
  const auto K = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::vector<RealVec> inputs(16, RealVec(K));
  for (auto& q : inputs)
    for (double& v : q) v = normal(rng);
  std::size_t i = 0;
  for (auto _ : state) {
    auto r = omega_k_argmax(inputs[i++ % inputs.size()], 1.0, OmegaK{std::max<std::size_t>(1, K / 10)});
    benchmark::DoNotOptimize(r.objective);
  }
  state.SetComplexityN(state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(batch_gradient, ce_serial, "ce", Exec::serial)->Arg(256)->Arg(4096);
BENCHMARK_CAPTURE(batch_gradient, ce_parallel, "ce", Exec::parallel)->Arg(256)->Arg(4096);
BENCHMARK_CAPTURE(batch_gradient, aldr_serial, "aldr_kl", Exec::serial)->Arg(256)->Arg(4096);
BENCHMARK_CAPTURE(batch_gradient, aldr_parallel, "aldr_kl", Exec::parallel)->Arg(256)->Arg(4096);
BENCHMARK_CAPTURE(scores, serial, Exec::serial)->Arg(4096);
BENCHMARK_CAPTURE(scores, parallel, Exec::parallel)->Arg(4096);
BENCHMARK(capped_simplex)->RangeMultiplier(4)->Range(1 << 10, 1 << 18)->Complexity(benchmark::oNLogN);

BENCHMARK_MAIN();
