#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "dos/clustering.hpp"
#include "dos/error.hpp"
#include "dos/sampling.hpp"
#include "oracles.hpp"

using dos::Matrix;

namespace {

dos::CandidateBatch random_batch(std::size_t n, dos::Rng& rng, bool coarse_scores = false) {
  dos::CandidateBatch b;
  b.features = oracle::random_matrix(n, 3, rng);
  for (std::size_t i = 0; i < n; ++i) {
    b.source_indices.push_back(1000 - 7 * i);
    b.scores.push_back(coarse_scores ? static_cast<double>(rng.uniform_index(4)) : rng.uniform());
  }
  return b;
}

dos::ClusterAssignment manual_clusters(std::vector<std::size_t> labels, std::size_t k) {
  dos::ClusterAssignment c;
  c.assignments = std::move(labels);
  c.centroids = Matrix(k, 1);
  return c;
}

}  // namespace

TEST_SUITE("sampling") {

TEST_CASE("dos picks the per-cluster maximum") {
  dos::Rng rng(40);
  for (int trial = 0; trial < 50; ++trial) {
    const auto batch = random_batch(40, rng, trial % 2 == 0);
    dos::Rng krng(trial);
    const auto clusters = dos::kmeans_normalized(batch.features, 8, krng);
    const auto sel = dos::sample_dos(batch, clusters);
    CHECK(sel.indices == oracle::per_cluster_max(clusters.assignments, batch.scores, batch.source_indices));
    CHECK(sel.size() == clusters.non_empty_clusters());
    CHECK(sel.strategy == dos::Strategy::Dos);
  }
}

TEST_CASE("dos skips empty clusters") {
  dos::CandidateBatch b;
  b.features = Matrix(4, 1, 1.0);
  b.source_indices = {5, 6, 7, 8};
  b.scores = {0.1, 0.9, 0.9, 0.2};
  const auto sel = dos::sample_dos(b, manual_clusters({3, 0, 0, 3}, 5));
  CHECK(sel.indices == std::vector<std::size_t>{1, 3});
  CHECK(sel.cluster_ids == std::vector<long>{0, 3});
}

TEST_CASE("greedy takes the top-m with ties to the lower pool index") {
  dos::CandidateBatch b;
  b.features = Matrix(4, 1);
  b.source_indices = {9, 2, 5, 1};
  b.scores = {0.5, 0.7, 0.5, 0.1};
  const auto sel = dos::sample_greedy(b, 2);
  CHECK(sel.indices == std::vector<std::size_t>{1, 2});
  CHECK(sel.cluster_ids == std::vector<long>{dos::kNoCluster, dos::kNoCluster});
  CHECK_THROWS_AS(dos::sample_greedy(b, 5), dos::Error);
}

TEST_CASE("random selection is distinct and seeded") {
  dos::Rng rng(1);
  const auto b = random_batch(30, rng);
  dos::Rng a(5), c(5);
  const auto s1 = dos::sample_random(b, 10, a), s2 = dos::sample_random(b, 10, c);
  CHECK(s1.indices == s2.indices);
  CHECK(std::set<std::size_t>(s1.indices.begin(), s1.indices.end()).size() == 10);
}

TEST_CASE("biased selection puts all mass on one cluster") {
  dos::Rng rng(2);
  const auto b = random_batch(12, rng);
  const auto clusters = manual_clusters({0, 1, 1, 1, 2, 2, 1, 0, 1, 2, 2, 2}, 3);
  const auto sel = dos::sample_biased(b, clusters, 4, rng);
  for (std::size_t i : sel.indices) CHECK(clusters.assignments[i] == 1);  // tie 5 vs 5 goes to cluster 1
  const auto target = dos::sample_biased(b, clusters, 2, rng, 0);
  for (std::size_t i : target.indices) CHECK(clusters.assignments[i] == 0);
  CHECK_THROWS_AS(dos::sample_biased(b, clusters, 3, rng, 0), dos::Error);
}

TEST_CASE("uniform selection balances clusters") {
  dos::Rng rng(3);
  const auto b = random_batch(30, rng);
  std::vector<std::size_t> labels(30);
  for (std::size_t i = 0; i < 30; ++i) labels[i] = i % 5 == 0 ? 0 : (i % 2 == 0 ? 1 : 2);
  const auto clusters = manual_clusters(labels, 3);
  const auto sel = dos::sample_uniform_clusters(b, clusters, 12, rng);
  std::vector<std::size_t> count(3);
  for (std::size_t i : sel.indices) ++count[clusters.assignments[i]];
  CHECK(count == std::vector<std::size_t>{4, 4, 4});
  // Cluster 0 holds 6 points; asking for 27 exhausts it and fills from the rest.
  const auto big = dos::sample_uniform_clusters(b, clusters, 27, rng);
  CHECK(big.size() == 27);
  CHECK(std::set<std::size_t>(big.indices.begin(), big.indices.end()).size() == 27);
}

TEST_CASE("strategy names round trip") {
  for (auto s : {dos::Strategy::Random, dos::Strategy::Greedy, dos::Strategy::Biased, dos::Strategy::Uniform, dos::Strategy::Dos})
    CHECK(dos::parse_strategy(dos::to_string(s)) == s);
  CHECK_THROWS_AS(dos::parse_strategy("coreset"), dos::Error);
}

TEST_CASE("diversity delta matches the all-pairs oracle") {
  dos::Rng rng(44);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix x = oracle::random_matrix(2 + rng.uniform_index(40), 1 + rng.uniform_index(5), rng);
    CHECK(dos::diversity_delta(x) == doctest::Approx(oracle::diversity(x)).epsilon(1e-9));
  }
  CHECK(dos::diversity_delta(Matrix(3, 2, 1.0)) == 0.0);
  CHECK_THROWS_AS(dos::diversity_delta(Matrix(1, 2)), dos::Error);
}

TEST_CASE("candidate batch validation") {
  dos::CandidateBatch b;
  b.features = Matrix(3, 2);
  b.source_indices = {0, 1, 2};
  b.scores = {0, 1};
  CHECK_THROWS_AS(b.validate(), dos::Error);
}

TEST_CASE("selection csv") {
  dos::CandidateBatch b;
  b.features = Matrix(2, 1);
  b.source_indices = {10, 20};
  b.scores = {0.25, 0.5};
  const auto sel = dos::sample_dos(b, manual_clusters({1, 0}, 2));
  std::ostringstream out;
  dos::write_selection_csv_header(out);
  dos::write_selection_csv(out, b, sel);
  CHECK(out.str() == "pool_index,cluster_id,score,strategy\n20,0,0.5,dos\n10,1,0.25,dos\n");
}

}
