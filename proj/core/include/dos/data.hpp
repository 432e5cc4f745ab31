#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dos/numeric.hpp"

namespace dos {

// ID rows with 1-based class labels in {1..K}.
struct LabeledBatch {
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

inline constexpr int kOutlierLabel = -1;

// Isotropic Gaussian N(mean, sigma^2 I).
struct GaussianSpec {
  std::vector<double> mean;
  double sigma = 1.0;
  std::size_t samples = 0;
  int label = kOutlierLabel;
};

Matrix sample_gaussian(const GaussianSpec& spec, Rng& rng);

// Two-dimensional toy benchmark: K class Gaussians on a regular polygon
// around the origin and small outlier micro-clusters on a ring of radius
// `radius`. Test micro-clusters sit at angles interleaved with the pool's.
struct ToyConfig {
  std::size_t num_classes = 3;
  double id_sigma = 1.0;
  double class_spacing = 6.0;  // polygon side length, in units of id_sigma
  std::size_t id_train_per_class = 500;
  std::size_t id_test_per_class = 500;
  std::size_t pool_clusters = 24;
  std::size_t test_clusters = 24;
  double ood_sigma = 0.2;
  std::size_t points_per_cluster = 50;
  double radius = 14.0;

  bool operator==(const ToyConfig&) const = default;
};

// Radius of the ID region: polygon circumradius plus 3 id_sigma.
double toy_id_extent(const ToyConfig& config);
Matrix toy_class_means(const ToyConfig& config);

struct ToyBenchmark {
  LabeledBatch id_train;
  LabeledBatch id_test;
  Matrix ood_pool;
  Matrix ood_test;
  Matrix class_means;
  Matrix pool_centers;
  Matrix test_centers;
};

ToyBenchmark generate_toy(std::uint64_t seed, const ToyConfig& config);

enum class Split : std::uint8_t { IdTrain = 0, IdTest = 1, OodPool = 2, OodTest = 3 };

std::string_view to_string(Split split) noexcept;

// Precomputed feature rows tagged by split. Labels are >= 1 on ID splits and
// kOutlierLabel on outlier splits.
struct EmbeddingDataset {
  std::size_t dim = 0;
  Matrix features;
  std::vector<Split> splits;
  std::vector<int> labels;

  std::size_t size() const noexcept { return splits.size(); }
  std::size_t count(Split split) const noexcept;
  std::size_t num_classes() const noexcept;  // largest ID label
  Matrix rows(Split split) const;
  LabeledBatch labeled(Split split) const;
  // Throws ErrorKind::Parse on inconsistent dims or labels.
  void validate() const;

  friend bool operator==(const EmbeddingDataset&, const EmbeddingDataset&) = default;
};

EmbeddingDataset to_embedding_dataset(const ToyBenchmark& toy);

// Binary: "DOSEMB1\0", u32 dim, u32 rows, then per row u8 split, i32 label, dim x f64 (all little-endian).
std::vector<std::uint8_t> encode_embeddings(const EmbeddingDataset& data);
EmbeddingDataset decode_embeddings(std::span<const std::uint8_t> bytes);

// CSV: header "split,label,f0,...,f{d-1}"; split is a name (id-train) or tag digit.
std::string embeddings_to_csv(const EmbeddingDataset& data);
EmbeddingDataset parse_embeddings_csv(std::string_view text);

void save_embeddings(const EmbeddingDataset& data, const std::filesystem::path& path);
void save_embeddings_csv(const EmbeddingDataset& data, const std::filesystem::path& path);
// Detects binary by magic, otherwise parses CSV.
EmbeddingDataset load_embeddings(const std::filesystem::path& path);

// One epoch of candidate groups: the pool is shuffled and cut into contiguous
// groups of candidate_size; a short final group is kept only if it holds at least k rows.
std::vector<std::vector<std::size_t>> candidate_batches(std::size_t pool_rows, std::size_t candidate_size,
                                                        std::size_t k, Rng& rng);

// Endless candidate groups: a fresh shuffled partition whenever the previous one runs out.
class CandidateStream {
 public:
  CandidateStream(std::size_t pool_rows, std::size_t candidate_size, std::size_t k, Rng rng);

  const std::vector<std::size_t>& next();

 private:
  std::size_t pool_rows_;
  std::size_t candidate_size_;
  std::size_t k_;
  Rng rng_;
  std::vector<std::vector<std::size_t>> groups_;
  std::size_t cursor_ = 0;
};

}  // namespace dos
