#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <string>

#include "dos/data.hpp"
#include "dos/error.hpp"

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

dos::ToyConfig small_toy() {
  dos::ToyConfig c;
  c.id_train_per_class = 20;
  c.id_test_per_class = 10;
  c.points_per_cluster = 5;
  return c;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("toy benchmark shapes and labels") {
  const auto toy = dos::generate_toy(1, dos::ToyConfig{});
  CHECK(toy.id_train.size() == 1500);
  CHECK(toy.id_test.size() == 1500);
  CHECK(toy.ood_pool.rows() == 24 * 50);
  CHECK(toy.ood_test.rows() == 24 * 50);
  CHECK(toy.id_train.features.cols() == 2);
  std::set<int> labels(toy.id_train.labels.begin(), toy.id_train.labels.end());
  CHECK(labels == std::set<int>{1, 2, 3});
}

TEST_CASE("toy class means form an equilateral triangle of side 6 sigma") {
  const Matrix m = dos::toy_class_means(dos::ToyConfig{});
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(std::sqrt(dos::squared_distance(m.row(i), m.row((i + 1) % 3))) == doctest::Approx(6.0));
}

TEST_CASE("toy generation is deterministic per seed") {
  CHECK(dos::to_embedding_dataset(dos::generate_toy(5, small_toy())) ==
        dos::to_embedding_dataset(dos::generate_toy(5, small_toy())));
  CHECK(!(dos::to_embedding_dataset(dos::generate_toy(5, small_toy())) ==
          dos::to_embedding_dataset(dos::generate_toy(6, small_toy()))));
}

TEST_CASE("outliers lie far from every class") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto toy = dos::generate_toy(seed, dos::ToyConfig{});
    double max_id = 0.0;
    for (const auto* batch : {&toy.id_train, &toy.id_test})
      for (std::size_t i = 0; i < batch->size(); ++i)
        max_id = std::max(max_id, std::sqrt(dos::squared_distance(batch->features.row(i),
                                                                  toy.class_means.row(batch->labels[i] - 1))));
    double min_ood = 1e300;
    for (const auto* ood : {&toy.ood_pool, &toy.ood_test})
      for (std::size_t i = 0; i < ood->rows(); ++i)
        for (std::size_t c = 0; c < 3; ++c)
          min_ood = std::min(min_ood, std::sqrt(dos::squared_distance(ood->row(i), toy.class_means.row(c))));
    CHECK(min_ood > 2.0 * max_id);
  }
}

TEST_CASE("pool and test micro-cluster centers are disjoint") {
  const auto toy = dos::generate_toy(3, dos::ToyConfig{});
  for (std::size_t i = 0; i < toy.pool_centers.rows(); ++i)
    for (std::size_t j = 0; j < toy.test_centers.rows(); ++j)
      CHECK(dos::squared_distance(toy.pool_centers.row(i), toy.test_centers.row(j)) > 1.0);
}

TEST_CASE("empty ID splits are allowed") {
  auto c = small_toy();
  c.id_train_per_class = 0;
  c.id_test_per_class = 0;
  const auto toy = dos::generate_toy(1, c);
  CHECK(toy.id_train.size() == 0);
  CHECK(toy.ood_pool.rows() == 24 * 5);
}

TEST_CASE("invalid toy configs") {
  auto c = small_toy();
  c.id_sigma = 0;
  CHECK(kind_of([&] { dos::generate_toy(1, c); }) == dos::ErrorKind::Config);
  c = small_toy();
  c.ood_sigma = -1;
  CHECK(kind_of([&] { dos::generate_toy(1, c); }) == dos::ErrorKind::Config);
  c = small_toy();
  c.radius = dos::toy_id_extent(c);
  CHECK(kind_of([&] { dos::generate_toy(1, c); }) == dos::ErrorKind::Config);
}

TEST_CASE("embedding binary and csv round trip") {
  const auto data = dos::to_embedding_dataset(dos::generate_toy(2, small_toy()));
  CHECK(dos::decode_embeddings(dos::encode_embeddings(data)) == data);
  CHECK(dos::parse_embeddings_csv(dos::embeddings_to_csv(data)) == data);
  const auto dir = std::filesystem::temp_directory_path();
  dos::save_embeddings(data, dir / "doslab_emb.bin");
  dos::save_embeddings_csv(data, dir / "doslab_emb.csv");
  CHECK(dos::load_embeddings(dir / "doslab_emb.bin") == data);
  CHECK(dos::load_embeddings(dir / "doslab_emb.csv") == data);
  std::filesystem::remove(dir / "doslab_emb.bin");
  std::filesystem::remove(dir / "doslab_emb.csv");
  CHECK(data.count(dos::Split::OodTest) == 24 * 5);
  CHECK(data.labeled(dos::Split::IdTest).size() == 30);
}

TEST_CASE("embedding csv parse errors") {
  CHECK(dos::parse_embeddings_csv("split,label,f0,f1\n").size() == 0);
  try {
    dos::parse_embeddings_csv("split,label,f0,f1\nid-train,1,0.5,0.5\nood-pool,-1,0.5\n");
    FAIL("expected parse error");
  } catch (const dos::Error& e) {
    CHECK(e.kind() == dos::ErrorKind::Parse);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK(kind_of([] { dos::parse_embeddings_csv("split,label,f0\nood-later,-1,1\n"); }) == dos::ErrorKind::Parse);
  CHECK(kind_of([] { dos::parse_embeddings_csv("split,label,f0\nid-train,-1,1\n"); }) == dos::ErrorKind::Parse);
  CHECK(kind_of([] { dos::parse_embeddings_csv("bogus\n"); }) == dos::ErrorKind::Parse);
}

TEST_CASE("embedding binary parse errors") {
  auto bytes = dos::encode_embeddings(dos::to_embedding_dataset(dos::generate_toy(2, small_toy())));
  CHECK(kind_of([&] { dos::decode_embeddings(std::span(bytes).first(bytes.size() - 1)); }) == dos::ErrorKind::Parse);
  bytes[0] = 'x';
  CHECK(kind_of([&] { dos::decode_embeddings(bytes); }) == dos::ErrorKind::Parse);
  CHECK(kind_of([] { dos::load_embeddings("/nonexistent/emb.bin"); }) == dos::ErrorKind::Io);
}

TEST_CASE("candidate batches partition the pool") {
  dos::Rng rng(1);
  auto groups = dos::candidate_batches(256, 128, 64, rng);
  CHECK(groups.size() == 2);
  std::set<std::size_t> seen;
  for (const auto& g : groups) seen.insert(g.begin(), g.end());
  CHECK(seen.size() == 256);

  groups = dos::candidate_batches(300, 128, 64, rng);
  CHECK(groups.size() == 2);
  seen.clear();
  for (const auto& g : groups) seen.insert(g.begin(), g.end());
  CHECK(seen.size() == 256);

  CHECK(dos::candidate_batches(300, 128, 40, rng).size() == 3);  // short group of 44 >= k is kept

  dos::Rng a(9), b(9);
  CHECK(dos::candidate_batches(500, 100, 10, a) == dos::candidate_batches(500, 100, 10, b));
  CHECK(kind_of([&] { dos::candidate_batches(100, 200, 10, rng); }) == dos::ErrorKind::InvalidRequest);
  CHECK(kind_of([&] { dos::candidate_batches(100, 5, 10, rng); }) == dos::ErrorKind::InvalidRequest);
}

TEST_CASE("candidate stream reshuffles when exhausted") {
  dos::CandidateStream stream(10, 4, 2, dos::Rng(3));
  std::set<std::size_t> first;
  for (int i = 0; i < 3; ++i) {
    const auto g = stream.next();
    first.insert(g.begin(), g.end());
  }
  CHECK(first.size() == 10);  // groups of 4, 4, 2
  CHECK(stream.next().size() == 4);
}

}
