#include <benchmark/benchmark.h>

#include "dos/clustering.hpp"
#include "dos/sampling.hpp"

namespace {

dos::Matrix random_features(std::size_t n, std::size_t d, std::uint64_t seed) {
  dos::Rng rng(seed);
  dos::Matrix m(n, d);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

// One candidate group at the default training scale: 256 x 128 features, k = 64.
void BM_KMeansNormalized(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const dos::Matrix x = random_features(n, 128, 1);
  for (auto _ : state) {
    dos::Rng rng(2);
    benchmark::DoNotOptimize(dos::kmeans_normalized(x, k, rng));
  }
}
BENCHMARK(BM_KMeansNormalized)->Args({256, 64})->Args({1024, 64})->Unit(benchmark::kMillisecond);

void BM_SampleDos(benchmark::State& state) {
  const dos::Matrix x = random_features(256, 128, 3);
  dos::Rng rng(4);
  const auto clusters = dos::kmeans_normalized(x, 64, rng);
  dos::CandidateBatch batch{x, {}, {}};
  for (std::size_t i = 0; i < 256; ++i) {
    batch.source_indices.push_back(i);
    batch.scores.push_back(rng.uniform());
  }
  for (auto _ : state) benchmark::DoNotOptimize(dos::sample_dos(batch, clusters));
}
BENCHMARK(BM_SampleDos);

void BM_DiversityDelta(benchmark::State& state) {
  const dos::Matrix x = random_features(static_cast<std::size_t>(state.range(0)), 128, 5);
  for (auto _ : state) benchmark::DoNotOptimize(dos::diversity_delta(x));
}
BENCHMARK(BM_DiversityDelta)->Arg(64)->Arg(512);

}  // namespace
