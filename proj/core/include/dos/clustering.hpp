#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dos/numeric.hpp"

namespace dos {

// Whether rows are L2-normalized before clustering. Raw exists for the
// feature-processing ablation; Normalized is the default everywhere.
enum class FeatureMode { Normalized, Raw };

struct ClusterAssignment {
  std::vector<std::size_t> assignments;  // per input row, in [0, k)
  Matrix centroids;                      // k x d, in clustering space
  double inertia = 0.0;                  // sum of squared distances to assigned centroids
  std::size_t iterations_run = 0;
  std::vector<double> inertia_trace;  // inertia after each assignment step

  std::size_t k() const noexcept { return centroids.rows(); }
  std::vector<std::size_t> cluster_sizes() const;
  std::size_t non_empty_clusters() const;

  friend bool operator==(const ClusterAssignment&, const ClusterAssignment&) = default;
};

struct KMeansOptions {
  std::size_t max_iters = 100;
  double tol = 1e-4;  // stop once the largest centroid displacement falls below this
  FeatureMode mode = FeatureMode::Normalized;
};

// Rows as they enter distance computations: L2-normalized in Normalized mode.
Matrix clustering_space(const Matrix& features, FeatureMode mode);

// D^2 seeding. First centroid uniform; each next one drawn with probability
// proportional to squared distance to the nearest centroid chosen so far.
Matrix kmeans_plusplus_seed(const Matrix& features, std::size_t k, Rng& rng,
                            FeatureMode mode = FeatureMode::Normalized);

// argmin_j ||x - c_j||^2 over rows in clustering space; ties go to the lowest j.
std::vector<std::size_t> assign_to_nearest(const Matrix& features, const Matrix& centroids,
                                           FeatureMode mode = FeatureMode::Normalized);

// Lloyd iterations from k-means++ seeds. An emptied cluster is reseeded at the
// point farthest from its assigned centroid.
ClusterAssignment kmeans(const Matrix& features, std::size_t k, Rng& rng, const KMeansOptions& options = {});

ClusterAssignment kmeans_normalized(const Matrix& features, std::size_t k, Rng& rng,
                                    std::size_t max_iters = 100, double tol = 1e-4);

double within_cluster_sum_of_squares(const Matrix& points, std::span<const std::size_t> assignments,
                                     const Matrix& centroids);

// Returned instead of +inf when within-cluster dispersion is exactly zero.
inline constexpr double kCalinskiHarabaszSentinel = 1e300;

// [B / (k - 1)] / [W / (n - k)] over the non-empty clusters, with B the
// between-cluster and W the within-cluster dispersion.
double calinski_harabasz(const Matrix& features, std::span<const std::size_t> assignments,
                         FeatureMode mode = FeatureMode::Normalized);

}  // namespace dos
