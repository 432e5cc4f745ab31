#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dos/data.hpp"
#include "dos/model.hpp"
#include "dos/scoring.hpp"

namespace dos {

inline constexpr double kDefaultTpr = 0.95;
inline constexpr std::size_t kHistogramBins = 50;

// Largest ID score value tau with #{s >= tau} / n >= target_tpr: the
// (n - ceil(target_tpr * n) + 1)-th smallest score. No interpolation.
double threshold_at_tpr(std::span<const double> id_scores, double target_tpr = kDefaultTpr);

// Fraction of OOD scores >= threshold_at_tpr(id_scores).
double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores,
                  double target_tpr = kDefaultTpr);

// P(id > ood) + P(id == ood) / 2, via a sorted merge.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

// Argmax over the first K logits against 1-based labels; the absent logit is ignored.
double accuracy_from_logits(const Matrix& logits, std::span<const int> labels, std::size_t num_classes);
double id_accuracy(const MlpModel& model, const LabeledBatch& id_test);

struct ScoreHistogram {
  std::vector<double> bin_edges;  // bins + 1 edges over the joint score range
  std::vector<std::size_t> id_counts;
  std::vector<std::size_t> ood_counts;

  friend bool operator==(const ScoreHistogram&, const ScoreHistogram&) = default;
};

ScoreHistogram score_histogram(std::span<const double> id_scores, std::span<const double> ood_scores,
                               std::size_t bins = kHistogramBins);

struct EvalReport {
  double fpr95 = 0.0;
  double auroc = 0.0;
  double id_accuracy = 0.0;
  double tau = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
  ScoreHistogram histogram;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

EvalReport evaluate_scores(std::span<const double> id_scores, std::span<const double> ood_scores,
                           double id_accuracy);
EvalReport evaluate(const MlpModel& model, const LabeledBatch& id_test, const Matrix& ood_test, ScoreKind score);

enum class ReportFormat { Json, Csv };

// JSON keys: fpr95, auroc, acc, tau, n_id, n_ood, hist_id, hist_ood, bin_edges,
// then a footer object carrying the histogram sums.
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(std::string_view text);
// One metrics row, a histogram block, and a "# footer" line with the sums.
std::string report_to_csv(const EvalReport& report);
EvalReport report_from_csv(std::string_view text);

// Throws ErrorKind::InvalidInput (before touching the file) on an empty score side.
void export_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format);
EvalReport import_report(const std::filesystem::path& path, ReportFormat format);

}  // namespace dos
