#include "dos/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <string>

#include "dos/error.hpp"

namespace dos {

namespace {

void check_m(const CandidateBatch& candidates, std::size_t m) {
  candidates.validate();
  if (m > candidates.size()) {
    throw Error(ErrorKind::InvalidRequest, "requested " + std::to_string(m) + " outliers from " +
                                               std::to_string(candidates.size()) + " candidates");
  }
}

void check_clusters(const CandidateBatch& candidates, const ClusterAssignment& clusters) {
  candidates.validate();
  if (clusters.assignments.size() != candidates.size()) {
    throw Error(ErrorKind::Shape, "cluster assignment covers " + std::to_string(clusters.assignments.size()) +
                                      " rows, candidate batch has " + std::to_string(candidates.size()));
  }
  for (std::size_t a : clusters.assignments) {
    if (a >= clusters.k()) throw Error(ErrorKind::Shape, "cluster id out of range");
  }
}

std::vector<std::vector<std::size_t>> members_by_cluster(const ClusterAssignment& clusters) {
  std::vector<std::vector<std::size_t>> members(clusters.k());
  for (std::size_t i = 0; i < clusters.assignments.size(); ++i) members[clusters.assignments[i]].push_back(i);
  return members;
}

}  // namespace

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::Random: return "random";
    case Strategy::Greedy: return "greedy";
    case Strategy::Biased: return "biased";
    case Strategy::Uniform: return "uniform";
    case Strategy::Dos: return "dos";
  }
  return "random";
}

Strategy parse_strategy(std::string_view text) {
  if (text == "random") return Strategy::Random;
  if (text == "greedy") return Strategy::Greedy;
  if (text == "biased") return Strategy::Biased;
  if (text == "uniform") return Strategy::Uniform;
  if (text == "dos") return Strategy::Dos;
  throw Error(ErrorKind::Config,
              "unknown strategy '" + std::string(text) + "' (expected random|greedy|biased|uniform|dos)");
}

void CandidateBatch::validate() const {
  if (features.rows() != source_indices.size() || scores.size() != source_indices.size()) {
    throw Error(ErrorKind::Shape, "candidate batch has " + std::to_string(features.rows()) + " feature rows, " +
                                      std::to_string(source_indices.size()) + " indices, " +
                                      std::to_string(scores.size()) + " scores");
  }
}

SelectedOutliers sample_random(const CandidateBatch& candidates, std::size_t m, Rng& rng) {
  check_m(candidates, m);
  SelectedOutliers out;
  out.strategy = Strategy::Random;
  out.indices = rng.sample_without_replacement(candidates.size(), m);
  out.cluster_ids.assign(m, kNoCluster);
  return out;
}

SelectedOutliers sample_greedy(const CandidateBatch& candidates, std::size_t m) {
  check_m(candidates, m);
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& s = candidates.scores;
  const auto& src = candidates.source_indices;
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                    [&](std::size_t a, std::size_t b) { return s[a] != s[b] ? s[a] > s[b] : src[a] < src[b]; });
  order.resize(m);
  SelectedOutliers out;
  out.strategy = Strategy::Greedy;
  out.indices = std::move(order);
  out.cluster_ids.assign(m, kNoCluster);
  return out;
}

SelectedOutliers sample_biased(const CandidateBatch& candidates, const ClusterAssignment& clusters, std::size_t m,
                               Rng& rng, std::optional<std::size_t> target_cluster) {
  check_clusters(candidates, clusters);
  const auto members = members_by_cluster(clusters);
  std::size_t target = 0;
  if (target_cluster) {
    if (*target_cluster >= members.size()) throw Error(ErrorKind::InvalidRequest, "target cluster out of range");
    target = *target_cluster;
  } else {
    for (std::size_t c = 1; c < members.size(); ++c) {
      if (members[c].size() > members[target].size()) target = c;
    }
  }
  const auto& pool = members[target];
  if (pool.size() < m) {
    throw Error(ErrorKind::InvalidRequest, "cluster " + std::to_string(target) + " holds " +
                                               std::to_string(pool.size()) + " candidates, " + std::to_string(m) +
                                               " requested");
  }
  SelectedOutliers out;
  out.strategy = Strategy::Biased;
  for (std::size_t pick : rng.sample_without_replacement(pool.size(), m)) out.indices.push_back(pool[pick]);
  out.cluster_ids.assign(m, static_cast<long>(target));
  return out;
}

SelectedOutliers sample_uniform_clusters(const CandidateBatch& candidates, const ClusterAssignment& clusters,
                                         std::size_t m, Rng& rng) {
  check_m(candidates, m);
  check_clusters(candidates, clusters);
  auto members = members_by_cluster(clusters);
  for (auto& group : members) rng.shuffle(group);

  SelectedOutliers out;
  out.strategy = Strategy::Uniform;
  std::vector<std::size_t> cursor(members.size(), 0);
  while (out.indices.size() < m) {
    for (std::size_t c = 0; c < members.size() && out.indices.size() < m; ++c) {
      if (cursor[c] >= members[c].size()) continue;
      out.indices.push_back(members[c][cursor[c]++]);
      out.cluster_ids.push_back(static_cast<long>(c));
    }
  }
  return out;
}

SelectedOutliers sample_dos(const CandidateBatch& candidates, const ClusterAssignment& clusters) {
  check_clusters(candidates, clusters);
  const auto& s = candidates.scores;
  const auto& src = candidates.source_indices;
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> best(clusters.k(), none);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::size_t& b = best[clusters.assignments[i]];
    if (b == none || s[i] > s[b] || (s[i] == s[b] && src[i] < src[b])) b = i;
  }
  SelectedOutliers out;
  out.strategy = Strategy::Dos;
  for (std::size_t c = 0; c < best.size(); ++c) {
    if (best[c] == none) continue;
    out.indices.push_back(best[c]);
    out.cluster_ids.push_back(static_cast<long>(c));
  }
  return out;
}

double diversity_delta(const Matrix& selected) {
  const std::size_t n = selected.rows();
  if (n < 2) throw Error(ErrorKind::InvalidRequest, "diversity needs at least 2 selected points");
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = squared_distance(selected.row(i), selected.row(j));
      nearest[i] = std::min(nearest[i], d);
      nearest[j] = std::min(nearest[j], d);
    }
  }
  double sum = 0.0;
  for (double d : nearest) sum += std::sqrt(d);
  return sum / static_cast<double>(n);
}

void write_selection_csv_header(std::ostream& out) { out << "pool_index,cluster_id,score,strategy\n"; }

void write_selection_csv(std::ostream& out, const CandidateBatch& candidates, const SelectedOutliers& selection) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(17);
  for (std::size_t i = 0; i < selection.size(); ++i) {
    const std::size_t idx = selection.indices[i];
    out << candidates.source_indices[idx] << ',' << selection.cluster_ids[i] << ',' << candidates.scores[idx] << ','
        << to_string(selection.strategy) << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

}  // namespace dos
