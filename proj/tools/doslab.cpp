// doslab: generate toy data, train, evaluate, compare strategies and inspect
// per-cluster selection counts.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dos/config.hpp"
#include "dos/data.hpp"
#include "dos/error.hpp"
#include "dos/eval.hpp"
#include "dos/harness.hpp"
#include "dos/model.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kDataError = 3, kDivergence = 4 };

int exit_code_for(dos::ErrorKind kind) {
  switch (kind) {
    case dos::ErrorKind::Config: return kConfigError;
    case dos::ErrorKind::Parse:
    case dos::ErrorKind::Io:
    case dos::ErrorKind::Shape:
    case dos::ErrorKind::InvalidInput:
    case dos::ErrorKind::InvalidLabel: return kDataError;
    case dos::ErrorKind::Divergence: return kDivergence;
    default: return kFailure;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dos::Error(dos::ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw dos::Error(dos::ErrorKind::Io, "write failed for " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw dos::Error(dos::ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

void print_report(const dos::EvalReport& r) {
  std::printf("fpr95=%.6f auroc=%.6f acc=%.6f tau=%.6g n_id=%zu n_ood=%zu\n", r.fpr95, r.auroc, r.id_accuracy, r.tau,
              r.n_id, r.n_ood);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diverse outlier sampling lab"};
  app.require_subcommand(1);

  fs::path config_path, out_dir, grid_path, checkpoint_path, data_path, resume_path;
  std::string score_name = "absent";
  std::size_t threads = 0, k = 6, m = 0;
  std::uint64_t seed = 0;
  std::string format = "json";

  auto* gen = app.add_subcommand("gen-data", "Write the configured dataset as binary and CSV embeddings");
  gen->add_option("--config", config_path, "Experiment config")->required();
  gen->add_option("--out", out_dir, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train one model and write run artifacts");
  train->add_option("--config", config_path, "Experiment config")->required();
  train->add_option("--out", out_dir, "Output directory (overrides [output] dir)");
  train->add_option("--resume", resume_path, "Continue from a checkpoint");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test splits of an embedding file");
  eval->add_option("--checkpoint", checkpoint_path)->required();
  eval->add_option("--data", data_path)->required();
  eval->add_option("--score", score_name, "absent|msp|energy")->check(CLI::IsMember({"absent", "msp", "energy"}));
  eval->add_option("--format", format, "json|csv")->check(CLI::IsMember({"json", "csv"}));
  eval->add_option("--out", out_dir, "Write the report here instead of stdout");

  auto* cmp = app.add_subcommand("compare", "Run a strategy/loss/seed grid and tabulate results");
  cmp->add_option("--grid", grid_path, "Grid config")->required();
  cmp->add_option("--out", out_dir, "Output directory")->required();
  cmp->add_option("--threads", threads, "Concurrent runs (0 = hardware)");

  auto* analyze = app.add_subcommand("sample-analyze", "Per-cluster selection counts for each strategy");
  analyze->add_option("--data", data_path)->required();
  analyze->add_option("--checkpoint", checkpoint_path)->required();
  analyze->add_option("--k", k, "Number of clusters")->required()->check(CLI::PositiveNumber);
  analyze->add_option("--m", m, "Outliers selected per strategy (default 4k)");
  analyze->add_option("--score", score_name, "absent|msp|energy")->check(CLI::IsMember({"absent", "msp", "energy"}));
  analyze->add_option("--seed", seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const dos::ExperimentConfig config = dos::load_config(config_path);
      dos::EmbeddingDataset data = config.data.source == dos::DataSource::Toy
                                       ? dos::to_embedding_dataset(dos::generate_toy(config.data.data_seed, config.data.toy))
                                       : dos::load_embeddings(config.data.path);
      make_dir(out_dir);
      dos::save_embeddings(data, out_dir / "embeddings.bin");
      dos::save_embeddings_csv(data, out_dir / "embeddings.csv");
      std::printf("wrote %zu rows (dim %zu) to %s\n", data.size(), data.dim, out_dir.string().c_str());
    } else if (*train) {
      dos::ExperimentConfig config = dos::load_config(config_path);
      if (!out_dir.empty()) config.output_dir = out_dir;
      std::optional<dos::Checkpoint> resume;
      if (!resume_path.empty()) resume = dos::load_checkpoint(resume_path);
      const auto run = dos::train(config, dos::load_training_data(config.data), resume);
      dos::write_artifacts(run, config.output_dir);
      print_report(run.report);
    } else if (*eval) {
      const dos::Checkpoint ckpt = dos::load_checkpoint(checkpoint_path);
      const dos::EmbeddingDataset data = dos::load_embeddings(data_path);
      const auto report = dos::evaluate(ckpt.model, data.labeled(dos::Split::IdTest), data.rows(dos::Split::OodTest),
                                        dos::parse_score_kind(score_name));
      const auto fmt = format == "csv" ? dos::ReportFormat::Csv : dos::ReportFormat::Json;
      if (!out_dir.empty()) {
        dos::export_report(report, out_dir, fmt);
      } else {
        std::cout << (fmt == dos::ReportFormat::Csv ? dos::report_to_csv(report) : dos::report_to_json(report));
      }
    } else if (*cmp) {
      const dos::GridSpec grid = dos::load_grid(grid_path);
      const auto table = dos::compare(grid.expand(), threads);
      make_dir(out_dir);
      write_text(out_dir / "comparison.csv", dos::comparison_csv(table));
      write_text(out_dir / "comparison.json", dos::comparison_json(table));
      for (const auto& a : table.aggregates) {
        std::printf("%-8s %-15s runs=%zu fpr95=%.4f auroc=%.4f acc=%.4f\n", std::string(dos::to_string(a.strategy)).c_str(),
                    std::string(dos::to_string(a.loss)).c_str(), a.runs, a.mean.fpr95, a.mean.auroc, a.mean.acc);
      }
    } else if (*analyze) {
      const dos::Checkpoint ckpt = dos::load_checkpoint(checkpoint_path);
      const dos::EmbeddingDataset data = dos::load_embeddings(data_path);
      const auto hist = dos::cluster_histogram(ckpt.model, data.rows(dos::Split::OodPool), k, m == 0 ? 4 * k : m,
                                               dos::parse_score_kind(score_name), seed);
      std::cout << dos::cluster_histogram_csv(hist);
    }
  } catch (const dos::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kOk;
}
