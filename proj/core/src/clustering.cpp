#include "dos/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "dos/error.hpp"

namespace dos {

std::vector<std::size_t> ClusterAssignment::cluster_sizes() const {
  std::vector<std::size_t> sizes(k(), 0);
  for (std::size_t a : assignments) ++sizes[a];
  return sizes;
}

std::size_t ClusterAssignment::non_empty_clusters() const {
  const auto sizes = cluster_sizes();
  return static_cast<std::size_t>(std::count_if(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; }));
}

Matrix clustering_space(const Matrix& features, FeatureMode mode) {
  if (mode == FeatureMode::Normalized) return normalize_rows(features);
  if (!all_finite(features.data())) throw Error(ErrorKind::InvalidInput, "non-finite feature");
  return features;
}

namespace {

void check_k(const Matrix& features, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::InvalidK, "k must be at least 1");
  if (features.rows() < k) {
    throw Error(ErrorKind::InvalidK,
                "k = " + std::to_string(k) + " exceeds row count " + std::to_string(features.rows()));
  }
}

Matrix seed_in_space(const Matrix& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows();
  Matrix centroids(k, points.cols());
  std::vector<char> chosen(n, 0);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());

  auto take = [&](std::size_t c, std::size_t idx) {
    chosen[idx] = 1;
    std::copy_n(points.row(idx).begin(), points.cols(), centroids.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points.row(i), points.row(idx)));
  };

  take(0, rng.uniform_index(n));
  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      std::size_t last_positive = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        last_positive = i;
        acc += d2[i];
        if (target < acc) {
          pick = i;
          break;
        }
      }
      if (pick == n) pick = last_positive;  // rounding at the top of the range
    } else {
      // Every remaining point duplicates a chosen centroid.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) free.push_back(i);
      }
      pick = free[rng.uniform_index(free.size())];
    }
    take(c, pick);
  }
  return centroids;
}

std::vector<std::size_t> nearest(const Matrix& points, const Matrix& centroids, std::vector<double>* dist) {
  std::vector<std::size_t> out(points.rows());
  if (dist) dist->assign(points.rows(), 0.0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const auto x = points.row(i);
    std::size_t best = 0;
    double best_d = squared_distance(x, centroids.row(0));
    for (std::size_t j = 1; j < centroids.rows(); ++j) {
      const double d = squared_distance(x, centroids.row(j));
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    out[i] = best;
    if (dist) (*dist)[i] = best_d;
  }
  return out;
}

}  // namespace

Matrix kmeans_plusplus_seed(const Matrix& features, std::size_t k, Rng& rng, FeatureMode mode) {
  check_k(features, k);
  return seed_in_space(clustering_space(features, mode), k, rng);
}

std::vector<std::size_t> assign_to_nearest(const Matrix& features, const Matrix& centroids, FeatureMode mode) {
  if (centroids.rows() == 0) throw Error(ErrorKind::Shape, "no centroids");
  if (centroids.cols() != features.cols()) {
    throw Error(ErrorKind::Shape, "centroid dim " + std::to_string(centroids.cols()) + " != feature dim " +
                                      std::to_string(features.cols()));
  }
  return nearest(clustering_space(features, mode), centroids, nullptr);
}

double within_cluster_sum_of_squares(const Matrix& points, std::span<const std::size_t> assignments,
                                     const Matrix& centroids) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    total += squared_distance(points.row(i), centroids.row(assignments[i]));
  }
  return total;
}

ClusterAssignment kmeans(const Matrix& features, std::size_t k, Rng& rng, const KMeansOptions& options) {
  check_k(features, k);
  const Matrix points = clustering_space(features, options.mode);
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();

  ClusterAssignment result;
  result.centroids = seed_in_space(points, k, rng);

  std::vector<double> dist;
  std::vector<std::size_t> previous;
  for (std::size_t iter = 0;; ++iter) {
    result.assignments = nearest(points, result.centroids, &dist);
    result.inertia = std::accumulate(dist.begin(), dist.end(), 0.0);
    if (!result.inertia_trace.empty()) {
      const double prev = result.inertia_trace.back();
      if (result.inertia > prev + 1e-9 * std::max(1.0, prev)) {
        throw Error(ErrorKind::State, "k-means objective increased from " + std::to_string(prev) + " to " +
                                          std::to_string(result.inertia));
      }
    }
    result.inertia_trace.push_back(result.inertia);
    result.iterations_run = iter;
    if (iter > 0 && result.assignments == previous) break;
    if (iter == options.max_iters) break;
    previous = result.assignments;

    Matrix next(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = result.assignments[i];
      ++counts[c];
      auto row = next.row(c);
      const auto x = points.row(i);
      for (std::size_t j = 0; j < d; ++j) row[j] += x[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (double& v : next.row(c)) v /= static_cast<double>(counts[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      std::copy_n(points.row(far).begin(), d, next.row(c).begin());
      dist[far] = 0.0;
    }

    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      shift = std::max(shift, std::sqrt(squared_distance(next.row(c), result.centroids.row(c))));
    }
    result.centroids = std::move(next);
    if (shift < options.tol) {
      // Final assignment against the settled centroids.
      result.assignments = nearest(points, result.centroids, &dist);
      result.inertia = std::accumulate(dist.begin(), dist.end(), 0.0);
      result.inertia_trace.push_back(result.inertia);
      result.iterations_run = iter + 1;
      break;
    }
  }
  return result;
}

ClusterAssignment kmeans_normalized(const Matrix& features, std::size_t k, Rng& rng, std::size_t max_iters,
                                    double tol) {
  return kmeans(features, k, rng, KMeansOptions{max_iters, tol, FeatureMode::Normalized});
}

double calinski_harabasz(const Matrix& features, std::span<const std::size_t> assignments, FeatureMode mode) {
  if (assignments.size() != features.rows()) {
    throw Error(ErrorKind::Shape, "assignment count does not match feature rows");
  }
  const Matrix points = clustering_space(features, mode);
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();

  // Compact the labels of non-empty clusters.
  std::map<std::size_t, std::size_t> label_index;
  for (std::size_t a : assignments) label_index.emplace(a, label_index.size());
  {
    std::size_t next = 0;
    for (auto& entry : label_index) entry.second = next++;
  }
  const std::size_t k = label_index.size();
  if (k < 2) throw Error(ErrorKind::UndefinedIndex, "Calinski-Harabasz needs at least 2 non-empty clusters");
  if (n <= k) throw Error(ErrorKind::UndefinedIndex, "Calinski-Harabasz needs more points than clusters");

  std::vector<double> overall(d, 0.0);
  Matrix means(k, d);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = label_index.at(assignments[i]);
    ++counts[c];
    const auto x = points.row(i);
    auto m = means.row(c);
    for (std::size_t j = 0; j < d; ++j) {
      m[j] += x[j];
      overall[j] += x[j];
    }
  }
  for (double& v : overall) v /= static_cast<double>(n);
  for (std::size_t c = 0; c < k; ++c) {
    for (double& v : means.row(c)) v /= static_cast<double>(counts[c]);
  }

  double between = 0.0;
  for (std::size_t c = 0; c < k; ++c) between += static_cast<double>(counts[c]) * squared_distance(means.row(c), overall);
  double within = 0.0;
  for (std::size_t i = 0; i < n; ++i) within += squared_distance(points.row(i), means.row(label_index.at(assignments[i])));

  if (within == 0.0) return kCalinskiHarabaszSentinel;
  return (between / static_cast<double>(k - 1)) / (within / static_cast<double>(n - k));
}

}  // namespace dos
