#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "dos/clustering.hpp"
#include "dos/numeric.hpp"

namespace dos {

enum class Strategy { Random, Greedy, Biased, Uniform, Dos };

std::string_view to_string(Strategy s) noexcept;
Strategy parse_strategy(std::string_view text);

// Scored candidate outliers for one selection round.
struct CandidateBatch {
  Matrix features;                          // one row per candidate (penultimate activations)
  std::vector<std::size_t> source_indices;  // pool row ids, used for tie-breaking
  std::vector<double> scores;               // higher = more ID-like = more informative

  std::size_t size() const noexcept { return source_indices.size(); }
  // Throws ErrorKind::Shape unless features, indices and scores agree in length.
  void validate() const;
};

inline constexpr long kNoCluster = -1;

struct SelectedOutliers {
  std::vector<std::size_t> indices;  // positions in the candidate batch
  Strategy strategy = Strategy::Random;
  std::vector<long> cluster_ids;  // parallel to indices; kNoCluster for cluster-free strategies

  std::size_t size() const noexcept { return indices.size(); }
};

SelectedOutliers sample_random(const CandidateBatch& candidates, std::size_t m, Rng& rng);

// Top-m by score; ties go to the lower pool index.
SelectedOutliers sample_greedy(const CandidateBatch& candidates, std::size_t m);

// m uniform draws from one cluster: the most populous unless target_cluster is given.
SelectedOutliers sample_biased(const CandidateBatch& candidates, const ClusterAssignment& clusters, std::size_t m,
                               Rng& rng, std::optional<std::size_t> target_cluster = std::nullopt);

// Round-robin over non-empty clusters in id order, drawing uniformly without
// replacement inside each cluster and skipping exhausted ones.
SelectedOutliers sample_uniform_clusters(const CandidateBatch& candidates, const ClusterAssignment& clusters,
                                         std::size_t m, Rng& rng);

// One pick per non-empty cluster: its highest-scoring member, ties to the
// lower pool index. Output is ordered by cluster id.
SelectedOutliers sample_dos(const CandidateBatch& candidates, const ClusterAssignment& clusters);

// Mean over points of the Euclidean distance to the nearest other point.
double diversity_delta(const Matrix& selected);

// Rows: pool_index,cluster_id,score,strategy
void write_selection_csv_header(std::ostream& out);
void write_selection_csv(std::ostream& out, const CandidateBatch& candidates, const SelectedOutliers& selection);

}  // namespace dos
