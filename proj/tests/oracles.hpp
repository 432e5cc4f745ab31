// Reference implementations used only by tests: slow, direct, or in extended
// precision.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "dos/numeric.hpp"

namespace oracle {

using big = boost::multiprecision::cpp_bin_float_50;

inline double logsumexp(std::span<const double> x) {
  big s = 0;
  for (double v : x) s += boost::multiprecision::exp(big(v));
  return static_cast<double>(boost::multiprecision::log(s));
}

inline std::vector<double> softmax(std::span<const double> x) {
  big s = 0;
  for (double v : x) s += boost::multiprecision::exp(big(v));
  std::vector<double> out;
  for (double v : x) out.push_back(static_cast<double>(boost::multiprecision::exp(big(v)) / s));
  return out;
}

inline dos::Matrix matmul(const dos::Matrix& a, const dos::Matrix& b) {
  dos::Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      big s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += big(a(i, k)) * big(b(k, j));
      out(i, j) = static_cast<double>(s);
    }
  return out;
}

inline dos::Matrix transpose(const dos::Matrix& a) {
  dos::Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

// Pairwise comparison: P(id > ood) + 0.5 P(id == ood).
inline double auroc(std::span<const double> id, std::span<const double> ood) {
  long long twice = 0;
  for (double a : id)
    for (double b : ood) twice += a > b ? 2 : (a == b ? 1 : 0);
  return static_cast<double>(twice) / (2.0 * static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

// Exhaustive sweep over every candidate threshold (each distinct ID score):
// the largest threshold whose TPR reaches the target, then FPR there.
inline double fpr_at_tpr(std::span<const double> id, std::span<const double> ood, double target = 0.95) {
  const double n = static_cast<double>(id.size());
  double best = -std::numeric_limits<double>::infinity();
  for (double t : id) {
    double hits = 0;
    for (double s : id) hits += s >= t ? 1 : 0;
    if (hits >= std::ceil(target * n - 1e-9) && t > best) best = t;
  }
  double fp = 0;
  for (double s : ood) fp += s >= best ? 1 : 0;
  return fp / static_cast<double>(ood.size());
}

// Mean distance from each point to its nearest other point, all pairs.
inline double diversity(const dos::Matrix& x) {
  big total = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    big best = -1;
    for (std::size_t j = 0; j < x.rows(); ++j) {
      if (i == j) continue;
      big d = 0;
      for (std::size_t c = 0; c < x.cols(); ++c) d += (big(x(i, c)) - x(j, c)) * (big(x(i, c)) - x(j, c));
      if (best < 0 || d < best) best = d;
    }
    total += boost::multiprecision::sqrt(best);
  }
  return static_cast<double>(total / x.rows());
}

// Calinski-Harabasz from the textbook definition over the clusters present.
inline double calinski_harabasz(const dos::Matrix& x, std::span<const std::size_t> labels) {
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  const std::size_t n = x.rows(), d = x.cols(), k = groups.size();
  std::vector<big> mean(d, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) mean[c] += x(i, c);
  for (auto& m : mean) m /= n;
  big between = 0, within = 0;
  for (const auto& [label, members] : groups) {
    std::vector<big> centroid(d, 0);
    for (std::size_t i : members)
      for (std::size_t c = 0; c < d; ++c) centroid[c] += x(i, c);
    for (auto& v : centroid) v /= members.size();
    for (std::size_t c = 0; c < d; ++c) between += big(members.size()) * (centroid[c] - mean[c]) * (centroid[c] - mean[c]);
    for (std::size_t i : members)
      for (std::size_t c = 0; c < d; ++c) within += (x(i, c) - centroid[c]) * (x(i, c) - centroid[c]);
  }
  return static_cast<double>((between / (k - 1)) / (within / (n - k)));
}

// For each cluster id, the member with the largest score (ties to lowest
// source index). Returned as candidate positions sorted by cluster id.
inline std::vector<std::size_t> per_cluster_max(std::span<const std::size_t> assignments,
                                                std::span<const double> scores,
                                                std::span<const std::size_t> source) {
  std::map<std::size_t, std::size_t> best;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    auto it = best.find(assignments[i]);
    if (it == best.end()) {
      best[assignments[i]] = i;
      continue;
    }
    const std::size_t j = it->second;
    if (scores[i] > scores[j] || (scores[i] == scores[j] && source[i] < source[j])) it->second = i;
  }
  std::vector<std::size_t> out;
  for (const auto& [c, i] : best) out.push_back(i);
  return out;
}

inline dos::Matrix random_matrix(std::size_t r, std::size_t c, dos::Rng& rng, double scale = 1.0) {
  dos::Matrix m(r, c);
  for (double& v : m.data()) v = scale * rng.normal();
  return m;
}

}  // namespace oracle
