#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dos/config.hpp"
#include "dos/data.hpp"
#include "dos/eval.hpp"
#include "dos/model.hpp"
#include "dos/sampling.hpp"

namespace dos {

struct TrainingData {
  LabeledBatch id_train;
  LabeledBatch id_test;
  Matrix ood_pool;
  Matrix ood_test;

  std::size_t num_classes() const;
  std::size_t input_dim() const noexcept { return ood_pool.cols(); }
};

TrainingData training_data_from(const ToyBenchmark& toy);
TrainingData training_data_from(const EmbeddingDataset& data);
// Generates the toy benchmark or loads the embedding file named by the config.
TrainingData load_training_data(const DataConfig& config);

// Score used both to rank candidates and to evaluate: absent-category score for
// the absent-category loss, energy for the energy loss, MSP for OE.
ScoreKind score_for_loss(LossKind loss) noexcept;

// Fixed semantic groups over the outlier pool (normalized k-means on the pool
// inputs) used by the biased and uniform strategies.
ClusterAssignment pool_groups(const Matrix& ood_pool, std::size_t groups, std::uint64_t seed);

struct EpochLog {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double loss = 0.0;
  double id_loss = 0.0;
  double ood_loss = 0.0;
  double diversity = 0.0;          // mean delta of the selections, normalized penultimate space
  double calinski_harabasz = 0.0;  // mean over iterations where defined; NaN if never defined
  double uncertainty = 0.0;        // mean p(K+1|x) over selected outliers
  double selected = 0.0;           // mean selection size per iteration
  std::size_t iterations = 0;
  std::size_t fallbacks = 0;  // iterations where clustering failed and uniform selection was used
};

struct RunArtifacts {
  ExperimentConfig config;
  std::vector<EpochLog> epochs;
  EvalReport report;
  Checkpoint checkpoint;
  std::string selection_csv;  // epoch,iteration,pool_index,cluster_id,score,strategy
};

// Trains per the configured strategy and loss, then evaluates on the test
// splits. With `resume`, training continues from the checkpoint's epoch.
RunArtifacts train(const ExperimentConfig& config, const TrainingData& data,
                   const std::optional<Checkpoint>& resume = std::nullopt);
RunArtifacts train(const ExperimentConfig& config);

std::string epoch_log_csv(const std::vector<EpochLog>& epochs);
// Writes config.ini, report.json, report.csv, checkpoint.bin, epochs.csv and
// selections.csv into dir (created if needed).
void write_artifacts(const RunArtifacts& run, const std::filesystem::path& dir);

struct ComparisonRow {
  Strategy strategy = Strategy::Dos;
  LossKind loss = LossKind::AbsentCategory;
  std::uint64_t seed = 0;
  double fpr95 = 0.0;
  double auroc = 0.0;
  double acc = 0.0;
  double mean_delta = 0.0;
  double mean_ch = 0.0;
};

// Per (strategy, loss) mean and sample std over seeds; std is NaN for a single run.
struct ComparisonAggregate {
  Strategy strategy = Strategy::Dos;
  LossKind loss = LossKind::AbsentCategory;
  std::size_t runs = 0;
  ComparisonRow mean;
  ComparisonRow std;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  std::vector<ComparisonAggregate> aggregates;
};

ComparisonAggregate aggregate_rows(const std::vector<ComparisonRow>& rows);
ComparisonTable aggregate(std::vector<ComparisonRow> rows);

// Runs every config (concurrently, up to `threads`, 0 = hardware) on one
// dataset. Configs must share their [data] section and differ only in
// strategy, loss and seed.
ComparisonTable compare(const std::vector<ExperimentConfig>& configs, const TrainingData& data,
                        std::size_t threads = 0);
ComparisonTable compare(const std::vector<ExperimentConfig>& configs, std::size_t threads = 0);

std::string comparison_csv(const ComparisonTable& table);
std::string comparison_json(const ComparisonTable& table);
std::vector<ComparisonRow> parse_comparison_rows_csv(std::string_view csv);

// Per-strategy counts of selected outliers per pool cluster.
struct ClusterHistogram {
  std::size_t k = 0;
  std::size_t m = 0;
  std::map<Strategy, std::vector<std::size_t>> counts;

  // max/min count over clusters; +inf when some cluster got nothing.
  double imbalance(Strategy s) const;
};

// Clusters `features` (model penultimate activations or external embeddings)
// into k groups and selects m outliers with each strategy. DOS picks one per
// cluster regardless of m.
ClusterHistogram cluster_histogram(const Matrix& features, std::span<const double> scores, std::size_t k,
                                   std::size_t m, std::uint64_t seed);
ClusterHistogram cluster_histogram(const MlpModel& model, const Matrix& pool, std::size_t k, std::size_t m,
                                   ScoreKind score, std::uint64_t seed);
std::string cluster_histogram_csv(const ClusterHistogram& hist);

// DOS vs greedy on identical candidate batches for a fixed model.
struct SelectionStats {
  double diversity = 0.0;    // mean delta over batches
  double uncertainty = 0.0;  // mean p(K+1|x) of the selected outliers
  std::size_t batches = 0;
};

std::map<Strategy, SelectionStats> selection_statistics(const MlpModel& model, const Matrix& pool,
                                                        const ExperimentConfig& config, std::uint64_t seed);

}  // namespace dos
