#include <doctest.h>

#include <set>

#include "dos/clustering.hpp"
#include "dos/error.hpp"
#include "oracles.hpp"

using dos::Matrix;

namespace {

dos::ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const dos::Error& e) {
    return e.kind();
  }
  return dos::ErrorKind::State;
}

Matrix blobs(std::size_t per, std::size_t k, dos::Rng& rng) {
  Matrix x(per * k, 3);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t i = 0; i < per; ++i)
      for (std::size_t d = 0; d < 3; ++d) x(c * per + i, d) = (d == c % 3 ? 10.0 : 0.0) + (c / 3) * 5.0 + 0.1 * rng.normal();
  return x;
}

}  // namespace

TEST_SUITE("clustering") {

TEST_CASE("assign_to_nearest matches brute force with ties to the lowest index") {
  dos::Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix x = oracle::random_matrix(40, 4, rng);
    const Matrix c = oracle::random_matrix(6, 4, rng);
    const auto got = dos::assign_to_nearest(x, c, dos::FeatureMode::Raw);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < c.rows(); ++j)
        if (dos::squared_distance(x.row(i), c.row(j)) < dos::squared_distance(x.row(i), c.row(best))) best = j;
      CHECK(got[i] == best);
    }
  }
  const Matrix same = Matrix::from_rows({{1, 0}, {1, 0}});
  CHECK(dos::assign_to_nearest(Matrix::from_rows({{0, 0}}), same, dos::FeatureMode::Raw)[0] == 0);
}

TEST_CASE("kmeans inertia never increases and clusters are recovered") {
  dos::Rng rng(7);
  const Matrix x = blobs(20, 3, rng);
  const auto res = dos::kmeans(x, 3, rng, {100, 1e-6, dos::FeatureMode::Raw});
  for (std::size_t i = 1; i < res.inertia_trace.size(); ++i) CHECK(res.inertia_trace[i] <= res.inertia_trace[i - 1] + 1e-12);
  CHECK(res.non_empty_clusters() == 3);
  for (std::size_t c = 0; c < 3; ++c) {
    std::set<std::size_t> labels;
    for (std::size_t i = 0; i < 20; ++i) labels.insert(res.assignments[c * 20 + i]);
    CHECK(labels.size() == 1);
  }
  CHECK(res.inertia == doctest::Approx(dos::within_cluster_sum_of_squares(x, res.assignments, res.centroids)));
}

TEST_CASE("kmeans is deterministic under a fixed seed") {
  dos::Rng a(3), b(3), data(1);
  const Matrix x = oracle::random_matrix(50, 5, data);
  CHECK(dos::kmeans_normalized(x, 6, a) == dos::kmeans_normalized(x, 6, b));
}

TEST_CASE("k equal to n gives singletons and duplicates keep every cluster non-empty") {
  dos::Rng rng(2);
  const Matrix x = oracle::random_matrix(5, 2, rng);
  const auto res = dos::kmeans(x, 5, rng, {100, 1e-4, dos::FeatureMode::Raw});
  CHECK(res.non_empty_clusters() == 5);
  CHECK(res.inertia == doctest::Approx(0.0));

  Matrix dup(8, 2, 1.0);
  dup(7, 0) = 2.0;
  const auto d = dos::kmeans(dup, 3, rng, {100, 1e-4, dos::FeatureMode::Raw});
  CHECK(d.assignments.size() == 8);
}

TEST_CASE("kmeans errors") {
  dos::Rng rng(1);
  CHECK(kind_of([&] { dos::kmeans_normalized(Matrix(3, 2, 1.0), 4, rng); }) == dos::ErrorKind::InvalidK);
  CHECK(kind_of([&] { dos::kmeans_normalized(Matrix(3, 2, 1.0), 0, rng); }) == dos::ErrorKind::InvalidK);
  CHECK(kind_of([&] { dos::kmeans_normalized(Matrix(3, 2, 0.0), 2, rng); }) == dos::ErrorKind::DegenerateVector);
}

TEST_CASE("normalized clustering ignores row scale") {
  dos::Rng data(10);
  const Matrix x = oracle::random_matrix(60, 4, data);
  Matrix scaled = x;
  for (std::size_t r = 0; r < scaled.rows(); ++r)
    for (double& v : scaled.row(r)) v *= (r % 3 == 0 ? 1e3 : (r % 3 == 1 ? 1e-3 : 1.0));
  dos::Rng a(4), b(4);
  CHECK(dos::kmeans_normalized(x, 5, a).assignments == dos::kmeans_normalized(scaled, 5, b).assignments);
}

TEST_CASE("kmeans++ picks distinct points") {
  dos::Rng rng(6);
  const Matrix x = oracle::random_matrix(30, 3, rng);
  const Matrix c = dos::kmeans_plusplus_seed(x, 10, rng, dos::FeatureMode::Raw);
  std::set<std::vector<double>> seen;
  for (std::size_t r = 0; r < c.rows(); ++r) seen.insert({c.row(r).begin(), c.row(r).end()});
  CHECK(seen.size() == 10);
}

TEST_CASE("calinski_harabasz matches the direct formula") {
  dos::Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 10 + rng.uniform_index(30), k = 2 + rng.uniform_index(4);
    const Matrix x = oracle::random_matrix(n, 3, rng);
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i < k ? i : rng.uniform_index(k);
    const double want = oracle::calinski_harabasz(x, labels);
    CHECK(dos::calinski_harabasz(x, labels, dos::FeatureMode::Raw) == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("calinski_harabasz edge cases") {
  const Matrix x = Matrix::from_rows({{0, 0}, {0, 0}, {1, 1}, {1, 1}});
  const std::vector<std::size_t> two{0, 0, 1, 1};
  CHECK(dos::calinski_harabasz(x, two, dos::FeatureMode::Raw) == dos::kCalinskiHarabaszSentinel);
  const std::vector<std::size_t> one{3, 3, 3, 3};
  CHECK(kind_of([&] { dos::calinski_harabasz(x, one, dos::FeatureMode::Raw); }) == dos::ErrorKind::UndefinedIndex);
  const std::vector<std::size_t> all{0, 1, 2, 3};
  CHECK(kind_of([&] { dos::calinski_harabasz(x, all, dos::FeatureMode::Raw); }) == dos::ErrorKind::UndefinedIndex);
}

}
