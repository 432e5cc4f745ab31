#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "dos/error.hpp"
#include "dos/eval.hpp"
#include "oracles.hpp"

using dos::Matrix;

namespace {

std::vector<double> draw_scores(std::size_t n, dos::Rng& rng, bool ties) {
  std::vector<double> s(n);
  for (double& v : s) v = ties ? static_cast<double>(rng.uniform_index(6)) / 5.0 : rng.normal();
  return s;
}

dos::EvalReport sample_report() {
  dos::Rng rng(3);
  const auto id = draw_scores(120, rng, false), ood = draw_scores(80, rng, false);
  return dos::evaluate_scores(id, ood, 0.9625);
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("threshold at 95% TPR on 1..100 is 6") {
  std::vector<double> s(100);
  std::iota(s.begin(), s.end(), 1.0);
  CHECK(dos::threshold_at_tpr(s) == 6.0);
  const std::vector<double> ood{5.0, 6.0, 7.0, 200.0};
  CHECK(dos::fpr_at_tpr(s, ood) == 0.75);
}

TEST_CASE("threshold tightness") {
  dos::Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto id = draw_scores(1 + rng.uniform_index(150), rng, trial % 2 == 0);
    const double tau = dos::threshold_at_tpr(id);
    const double n = static_cast<double>(id.size());
    double at = 0, above = 0;
    for (double s : id) {
      at += s >= tau;
      above += s > tau;
    }
    CHECK(at / n >= 0.95);
    CHECK(above / n < 0.95);
  }
}

TEST_CASE("fpr and auroc match brute force, ties included") {
  dos::Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const bool ties = trial % 2 == 1;
    const auto id = draw_scores(1 + rng.uniform_index(200), rng, ties);
    const auto ood = draw_scores(1 + rng.uniform_index(200), rng, ties);
    CHECK(dos::fpr_at_tpr(id, ood) == oracle::fpr_at_tpr(id, ood));
    CHECK(dos::auroc(id, ood) == oracle::auroc(id, ood));
    CHECK(std::abs(dos::auroc(id, ood) + dos::auroc(ood, id) - 1.0) <= 1e-12);
  }
}

TEST_CASE("auroc is invariant under increasing transforms") {
  dos::Rng rng(5);
  const auto id = draw_scores(60, rng, true), ood = draw_scores(50, rng, true);
  auto transform = [](std::vector<double> v) {
    for (double& x : v) x = std::exp(3.0 * x) - 7.0;
    return v;
  };
  CHECK(dos::auroc(transform(id), transform(ood)) == dos::auroc(id, ood));
}

TEST_CASE("fpr does not increase when outlier scores shift down") {
  dos::Rng rng(6);
  const auto id = draw_scores(100, rng, false);
  auto ood = draw_scores(100, rng, false);
  double previous = dos::fpr_at_tpr(id, ood);
  for (int step = 0; step < 10; ++step) {
    for (double& v : ood) v -= 0.2;
    const double now = dos::fpr_at_tpr(id, ood);
    CHECK(now <= previous);
    previous = now;
  }
}

TEST_CASE("metric edge cases") {
  const std::vector<double> one{0.5}, empty;
  CHECK(dos::auroc(std::vector<double>{1, 1}, std::vector<double>{1, 1}) == 0.5);
  CHECK(dos::auroc(std::vector<double>{2}, std::vector<double>{1}) == 1.0);
  CHECK_THROWS_AS(dos::auroc(empty, one), dos::Error);
  CHECK_THROWS_AS(dos::fpr_at_tpr(one, empty), dos::Error);
  CHECK_THROWS_AS(dos::threshold_at_tpr(std::vector<double>{1.0, std::nan("")}), dos::Error);
}

TEST_CASE("accuracy ignores the absent logit") {
  const Matrix logits = Matrix::from_rows({{2, 1, 0, 99}, {0, 3, 1, 99}, {0, 1, 0, -1}});
  const std::vector<int> labels{1, 2, 3};
  CHECK(dos::accuracy_from_logits(logits, labels, 3) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(dos::accuracy_from_logits(Matrix(0, 4), std::vector<int>{}, 3), dos::Error);
}

TEST_CASE("histogram counts every score") {
  dos::Rng rng(8);
  const auto id = draw_scores(77, rng, false), ood = draw_scores(33, rng, false);
  const auto h = dos::score_histogram(id, ood);
  CHECK(h.bin_edges.size() == 51);
  CHECK(std::accumulate(h.id_counts.begin(), h.id_counts.end(), std::size_t{0}) == 77);
  CHECK(std::accumulate(h.ood_counts.begin(), h.ood_counts.end(), std::size_t{0}) == 33);
  const auto flat = dos::score_histogram(std::vector<double>{2, 2}, std::vector<double>{2});
  CHECK(std::accumulate(flat.id_counts.begin(), flat.id_counts.end(), std::size_t{0}) == 2);
}

TEST_CASE("report json and csv round trip") {
  const auto r = sample_report();
  CHECK(dos::report_from_json(dos::report_to_json(r)) == r);
  CHECK(dos::report_from_csv(dos::report_to_csv(r)) == r);
  const auto dir = std::filesystem::temp_directory_path();
  dos::export_report(r, dir / "doslab_report.json", dos::ReportFormat::Json);
  dos::export_report(r, dir / "doslab_report.csv", dos::ReportFormat::Csv);
  CHECK(dos::import_report(dir / "doslab_report.json", dos::ReportFormat::Json) == r);
  CHECK(dos::import_report(dir / "doslab_report.csv", dos::ReportFormat::Csv) == r);
  std::filesystem::remove(dir / "doslab_report.json");
  std::filesystem::remove(dir / "doslab_report.csv");
}

TEST_CASE("report footer carries histogram sums") {
  const auto r = sample_report();
  const auto json = dos::report_to_json(r);
  CHECK(json.find("\"hist_id_sum\": 120") != std::string::npos);
  CHECK(dos::report_to_csv(r).find("# footer,hist_id_sum=120,hist_ood_sum=80") != std::string::npos);
  auto tampered = json;
  tampered.replace(tampered.find("\"hist_id_sum\": 120"), 18, "\"hist_id_sum\": 121");
  CHECK_THROWS_AS(dos::report_from_json(tampered), dos::Error);
}

TEST_CASE("report with no outliers is rejected before writing") {
  auto r = sample_report();
  r.n_ood = 0;
  const auto path = std::filesystem::temp_directory_path() / "doslab_never_written.json";
  std::filesystem::remove(path);
  try {
    dos::export_report(r, path, dos::ReportFormat::Json);
    FAIL("expected error");
  } catch (const dos::Error& e) {
    CHECK(e.kind() == dos::ErrorKind::InvalidInput);
  }
  CHECK(!std::filesystem::exists(path));
}

}
