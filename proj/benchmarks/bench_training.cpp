#include <benchmark/benchmark.h>

#include "dos/model.hpp"
#include "dos/scoring.hpp"

namespace {

void BM_TrainStep(benchmark::State& state) {
  dos::Rng rng(1);
  dos::MlpModel model = dos::MlpModel::he_uniform({2, 128, 128, 4}, rng);
  auto sgd = dos::make_sgd_state(model, {0.01, 0.9, 1e-4, {}, 0.1});
  dos::Matrix id(64, 2), ood(64, 2);
  for (double& v : id.data()) v = rng.normal();
  for (double& v : ood.data()) v = 10.0 * rng.normal();
  std::vector<int> labels(64);
  for (auto& y : labels) y = 1 + static_cast<int>(rng.uniform_index(3));
  for (auto _ : state) {
    const auto trace = dos::forward_trace(model, dos::vstack(id, ood));
    const dos::Matrix id_logits(64, 4, std::vector<double>(trace.logits.data().begin(), trace.logits.data().begin() + 256));
    const dos::Matrix ood_logits(64, 4, std::vector<double>(trace.logits.data().begin() + 256, trace.logits.data().end()));
    const auto loss = dos::absent_category_loss(id_logits, labels, ood_logits, 3);
    const auto grads = dos::backward(model, trace, dos::vstack(loss.id_grad, loss.ood_grad));
    dos::sgd_step(model, grads, sgd);
  }
}
BENCHMARK(BM_TrainStep);

void BM_ScoreCandidates(benchmark::State& state) {
  dos::Rng rng(2);
  const auto model = dos::MlpModel::he_uniform({2, 128, 128, 4}, rng);
  dos::Matrix x(256, 2);
  for (double& v : x.data()) v = rng.normal();
  for (auto _ : state) {
    const auto out = dos::forward(model, x);
    benchmark::DoNotOptimize(dos::score_rows(out.logits, 3, dos::ScoreKind::Absent));
  }
}
BENCHMARK(BM_ScoreCandidates);

}  // namespace
