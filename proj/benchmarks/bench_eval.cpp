#include <benchmark/benchmark.h>

#include "dos/eval.hpp"

namespace {

std::vector<double> scores(std::size_t n, double shift, std::uint64_t seed) {
  dos::Rng rng(seed);
  std::vector<double> s(n);
  for (double& v : s) v = rng.normal() + shift;
  return s;
}

void BM_Auroc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto id = scores(n, 1.0, 1), ood = scores(n, 0.0, 2);
  for (auto _ : state) benchmark::DoNotOptimize(dos::auroc(id, ood));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Auroc)->RangeMultiplier(4)->Range(1 << 8, 1 << 16)->Complexity();

void BM_FprAtTpr(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto id = scores(n, 1.0, 3), ood = scores(n, 0.0, 4);
  for (auto _ : state) benchmark::DoNotOptimize(dos::fpr_at_tpr(id, ood));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FprAtTpr)->RangeMultiplier(4)->Range(1 << 8, 1 << 16)->Complexity();

}  // namespace
