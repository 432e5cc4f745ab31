#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dos/clustering.hpp"
#include "dos/data.hpp"
#include "dos/model.hpp"
#include "dos/sampling.hpp"
#include "dos/scoring.hpp"

namespace dos {

enum class DataSource { Toy, File };

struct DataConfig {
  DataSource source = DataSource::Toy;
  std::filesystem::path path;  // embedding file when source = File
  std::uint64_t data_seed = 0;
  ToyConfig toy;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

// SGD defaults for raw-coordinate toy inputs: lr 0.01 (0.1 stalls the MLP on
// unnormalized inputs); other fields as SgdConfig.
SgdConfig toy_sgd();

struct ExperimentConfig {
  DataConfig data;
  std::vector<std::size_t> hidden{128, 128};

  std::size_t epochs = 100;
  std::size_t id_batch = 64;
  std::size_t ood_batch = 64;
  SgdConfig sgd = toy_sgd();
  double grad_clip = 5.0;  // global gradient-norm cap per step; 0 disables
  std::uint64_t seed = 0;

  Strategy strategy = Strategy::Dos;
  std::size_t candidate_size = 256;
  std::optional<std::size_t> k_clusters;  // defaults to id_batch
  FeatureMode feature_mode = FeatureMode::Normalized;
  std::size_t group_clusters = 6;          // fixed pool-level groups used by biased/uniform
  std::optional<std::size_t> biased_cluster;
  std::size_t kmeans_max_iters = 100;
  double kmeans_tol = 1e-4;

  LossKind loss = LossKind::AbsentCategory;
  std::optional<double> lambda;  // defaults per loss, see loss_weight()
  double m_in = -1.0;
  double m_out = 1.0;

  std::filesystem::path output_dir = "out";

  std::size_t clusters() const noexcept { return k_clusters.value_or(id_batch); }
  // 1.0 for absent_category, 0.5 for oe_uniform, 0.1 for energy unless set.
  double loss_weight() const noexcept;
  // Throws ErrorKind::Config on violated invariants.
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// INI-style text: [data] [model] [train] [sampling] [loss] [output] sections of
// key = value lines. Every key has a default; unknown sections or keys are errors.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Canonical text form; parse_config(to_config_text(c)) == c.
std::string to_config_text(const ExperimentConfig& config);
// FNV-1a over the canonical text, excluding the output directory.
std::uint64_t config_hash(const ExperimentConfig& config);

// A comparison grid: a base config plus a [grid] section listing
// strategies, losses and seeds to cross.
struct GridSpec {
  ExperimentConfig base;
  std::vector<Strategy> strategies;
  std::vector<LossKind> losses;
  std::vector<std::uint64_t> seeds;

  std::vector<ExperimentConfig> expand() const;
};

GridSpec parse_grid(std::string_view text);
GridSpec load_grid(const std::filesystem::path& path);

}  // namespace dos
