#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "relsal/detection.hpp"
#include "relsal/ranking.hpp"
#include "relsal/stack.hpp"
#include "relsal/subitizing.hpp"

namespace {

relsal::AgreementMap random_agreement(int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> level(0, 12);
  relsal::Raster<std::uint8_t> counts(side, side, 0);
  for (auto& v : counts.values()) {
    v = static_cast<std::uint8_t>(level(rng));
  }
  return relsal::AgreementMap(std::move(counts), 12);
}

relsal::SaliencyMap random_saliency(int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  relsal::Raster<double> values(side, side, 0.0);
  for (auto& v : values.values()) {
    v = u(rng);
  }
  return relsal::SaliencyMap(std::move(values));
}

void BM_BuildNestedStack(benchmark::State& state) {
  const auto a = random_agreement(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(relsal::build_nested_stack(a));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_BuildNestedStack)->Arg(64)->Arg(256);

void BM_ConfusionSweep(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto pred = random_saliency(side, 2);
  const auto gt = relsal::threshold_agreement(random_agreement(side, 3), 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(relsal::confusion_sweep(pred, gt));
  }
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_ConfusionSweep)->Arg(64)->Arg(256)->Arg(512);

// Full per-image protocol: 12 slices, each with a sweep, AUC, F-measures and MAE.
void BM_EvaluateAgainstStack(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto pred = random_saliency(side, 4);
  const auto stack = relsal::build_nested_stack(random_agreement(side, 5));
  for (auto _ : state) {
    benchmark::DoNotOptimize(relsal::evaluate_against_stack(pred, stack));
  }
}
BENCHMARK(BM_EvaluateAgainstStack)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Spearman(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> score(0, 9);  // coarse scores force ties
  std::vector<relsal::InstanceScore> a;
  std::vector<relsal::InstanceScore> b;
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = static_cast<std::uint16_t>(i + 1);
    a.push_back({id, static_cast<double>(score(rng)), 1});
    b.push_back({id, static_cast<double>(score(rng)), 1});
  }
  const auto ra = relsal::rank_order(a);
  const auto rb = relsal::rank_order(b);
  for (auto _ : state) {
    benchmark::DoNotOptimize(relsal::spearman(ra, rb));
  }
}
BENCHMARK(BM_Spearman)->Arg(8)->Arg(64)->Arg(1024);

void BM_AveragePrecision(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> conf(n);
  std::vector<bool> pos(n);
  for (std::size_t i = 0; i < n; ++i) {
    conf[i] = u(rng);
    pos[i] = u(rng) < 0.3;
  }
  const auto method = state.range(1) == 0 ? relsal::ApMethod::kVoc07 : relsal::ApMethod::kContinuous;
  for (auto _ : state) {
    benchmark::DoNotOptimize(relsal::average_precision(conf, pos, method));
  }
}
BENCHMARK(BM_AveragePrecision)->Args({1000, 0})->Args({1000, 1})->Args({100000, 0});

}  // namespace

BENCHMARK_MAIN();
