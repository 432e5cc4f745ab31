#include "dos/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "binary_io.hpp"
#include "dos/error.hpp"

namespace dos {

namespace {

using ordered_json = nlohmann::ordered_json;

void require_scores(std::span<const double> scores, const char* what) {
  if (scores.empty()) throw Error(ErrorKind::InvalidInput, std::string(what) + " scores are empty");
  if (!all_finite(scores)) throw Error(ErrorKind::InvalidInput, std::string(what) + " scores are not finite");
}

void check_report(const EvalReport& r) {
  if (r.n_id == 0 || r.n_ood == 0) throw Error(ErrorKind::InvalidInput, "report needs n_id > 0 and n_ood > 0");
  for (double f : {r.fpr95, r.auroc, r.id_accuracy}) {
    if (!(f >= 0.0 && f <= 1.0)) throw Error(ErrorKind::InvalidInput, "report fraction outside [0, 1]");
  }
}

std::size_t sum(const std::vector<std::size_t>& v) {
  std::size_t s = 0;
  for (std::size_t x : v) s += x;
  return s;
}

void check_histogram_sums(const EvalReport& r, std::size_t id_sum, std::size_t ood_sum) {
  if (sum(r.histogram.id_counts) != r.n_id || sum(r.histogram.ood_counts) != r.n_ood || id_sum != r.n_id ||
      ood_sum != r.n_ood) {
    throw Error(ErrorKind::Parse, "histogram counts do not match the footer sums");
  }
  if (r.histogram.bin_edges.size() != r.histogram.id_counts.size() + 1 ||
      r.histogram.ood_counts.size() != r.histogram.id_counts.size()) {
    throw Error(ErrorKind::Parse, "histogram arrays disagree in length");
  }
}

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
T parse_field(std::string_view token) {
  T value{};
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw Error(ErrorKind::Parse, "report csv: bad field '" + std::string(token) + "'");
  }
  return value;
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = s.find(sep, start);
    out.push_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

}  // namespace

double threshold_at_tpr(std::span<const double> id_scores, double target_tpr) {
  require_scores(id_scores, "ID");
  if (!(target_tpr > 0.0 && target_tpr <= 1.0)) throw Error(ErrorKind::InvalidInput, "target TPR must be in (0, 1]");
  const std::size_t n = id_scores.size();
  auto needed = static_cast<std::size_t>(std::ceil(target_tpr * static_cast<double>(n) - 1e-9));
  needed = std::clamp<std::size_t>(needed, 1, n);
  std::vector<double> sorted(id_scores.begin(), id_scores.end());
  const auto nth = sorted.begin() + static_cast<std::ptrdiff_t>(n - needed);
  std::nth_element(sorted.begin(), nth, sorted.end());
  return *nth;
}

double fpr_at_tpr(std::span<const double> id_scores, std::span<const double> ood_scores, double target_tpr) {
  require_scores(ood_scores, "OOD");
  const double tau = threshold_at_tpr(id_scores, target_tpr);
  const auto accepted = std::count_if(ood_scores.begin(), ood_scores.end(), [tau](double s) { return s >= tau; });
  return static_cast<double>(accepted) / static_cast<double>(ood_scores.size());
}

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
  require_scores(id_scores, "ID");
  require_scores(ood_scores, "OOD");
  std::vector<double> id(id_scores.begin(), id_scores.end());
  std::vector<double> ood(ood_scores.begin(), ood_scores.end());
  std::sort(id.begin(), id.end());
  std::sort(ood.begin(), ood.end());
  // Twice the win count: 2 per strictly greater pair, 1 per tie.
  std::uint64_t doubled = 0;
  std::size_t below = 0;
  std::size_t upto = 0;
  for (double s : id) {
    while (below < ood.size() && ood[below] < s) ++below;
    if (upto < below) upto = below;
    while (upto < ood.size() && ood[upto] == s) ++upto;
    doubled += 2 * below + (upto - below);
  }
  return static_cast<double>(doubled) / (2.0 * static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

double accuracy_from_logits(const Matrix& logits, std::span<const int> labels, std::size_t num_classes) {
  if (labels.empty()) throw Error(ErrorKind::InvalidInput, "accuracy of an empty labeled set");
  if (logits.rows() != labels.size() || logits.cols() < num_classes) {
    throw Error(ErrorKind::Shape, "logits do not match labels");
  }
  std::size_t correct = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const auto best = std::max_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(num_classes));
    if (static_cast<int>(best - row.begin()) + 1 == labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double id_accuracy(const MlpModel& model, const LabeledBatch& id_test) {
  if (id_test.size() == 0) throw Error(ErrorKind::InvalidInput, "accuracy of an empty labeled set");
  return accuracy_from_logits(forward(model, id_test.features).logits, id_test.labels, model.num_classes());
}

ScoreHistogram score_histogram(std::span<const double> id_scores, std::span<const double> ood_scores,
                               std::size_t bins) {
  if (bins == 0) throw Error(ErrorKind::InvalidInput, "histogram needs at least one bin");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (auto scores : {id_scores, ood_scores}) {
    for (double s : scores) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  }
  if (!(lo <= hi)) lo = hi = 0.0;
  if (lo == hi) hi = lo + 1.0;

  ScoreHistogram h;
  h.bin_edges.resize(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) h.bin_edges[i] = lo + width * static_cast<double>(i);
  h.bin_edges.back() = hi;
  auto fill = [&](std::span<const double> scores, std::vector<std::size_t>& counts) {
    counts.assign(bins, 0);
    for (double s : scores) {
      auto b = static_cast<std::size_t>((s - lo) / width);
      ++counts[std::min(b, bins - 1)];
    }
  };
  fill(id_scores, h.id_counts);
  fill(ood_scores, h.ood_counts);
  return h;
}

EvalReport evaluate_scores(std::span<const double> id_scores, std::span<const double> ood_scores,
                           double accuracy) {
  EvalReport r;
  r.tau = threshold_at_tpr(id_scores);
  r.fpr95 = fpr_at_tpr(id_scores, ood_scores);
  r.auroc = auroc(id_scores, ood_scores);
  r.id_accuracy = accuracy;
  r.n_id = id_scores.size();
  r.n_ood = ood_scores.size();
  r.histogram = score_histogram(id_scores, ood_scores);
  return r;
}

EvalReport evaluate(const MlpModel& model, const LabeledBatch& id_test, const Matrix& ood_test, ScoreKind score) {
  const std::size_t k = model.num_classes();
  const Matrix id_logits = forward(model, id_test.features).logits;
  const Matrix ood_logits = forward(model, ood_test).logits;
  const auto id_scores = score_rows(id_logits, k, score);
  const auto ood_scores = score_rows(ood_logits, k, score);
  return evaluate_scores(id_scores, ood_scores, accuracy_from_logits(id_logits, id_test.labels, k));
}

std::string report_to_json(const EvalReport& report) {
  check_report(report);
  ordered_json j;
  j["fpr95"] = report.fpr95;
  j["auroc"] = report.auroc;
  j["acc"] = report.id_accuracy;
  j["tau"] = report.tau;
  j["n_id"] = report.n_id;
  j["n_ood"] = report.n_ood;
  j["hist_id"] = report.histogram.id_counts;
  j["hist_ood"] = report.histogram.ood_counts;
  j["bin_edges"] = report.histogram.bin_edges;
  j["footer"] = {{"hist_id_sum", sum(report.histogram.id_counts)},
                 {"hist_ood_sum", sum(report.histogram.ood_counts)}};
  return j.dump(2) + "\n";
}

EvalReport report_from_json(std::string_view text) {
  try {
    const auto j = ordered_json::parse(text);
    EvalReport r;
    r.fpr95 = j.at("fpr95").get<double>();
    r.auroc = j.at("auroc").get<double>();
    r.id_accuracy = j.at("acc").get<double>();
    r.tau = j.at("tau").get<double>();
    r.n_id = j.at("n_id").get<std::size_t>();
    r.n_ood = j.at("n_ood").get<std::size_t>();
    r.histogram.id_counts = j.at("hist_id").get<std::vector<std::size_t>>();
    r.histogram.ood_counts = j.at("hist_ood").get<std::vector<std::size_t>>();
    r.histogram.bin_edges = j.at("bin_edges").get<std::vector<double>>();
    const auto& footer = j.at("footer");
    check_histogram_sums(r, footer.at("hist_id_sum").get<std::size_t>(), footer.at("hist_ood_sum").get<std::size_t>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("report json: ") + e.what());
  }
}

std::string report_to_csv(const EvalReport& report) {
  check_report(report);
  std::string out = "fpr95,auroc,acc,tau,n_id,n_ood\n";
  out += fmt(report.fpr95) + ',' + fmt(report.auroc) + ',' + fmt(report.id_accuracy) + ',' + fmt(report.tau) + ',' +
         std::to_string(report.n_id) + ',' + std::to_string(report.n_ood) + '\n';
  out += "bin_lo,bin_hi,hist_id,hist_ood\n";
  const auto& h = report.histogram;
  for (std::size_t i = 0; i < h.id_counts.size(); ++i) {
    out += fmt(h.bin_edges[i]) + ',' + fmt(h.bin_edges[i + 1]) + ',' + std::to_string(h.id_counts[i]) + ',' +
           std::to_string(h.ood_counts[i]) + '\n';
  }
  out += "# footer,hist_id_sum=" + std::to_string(sum(h.id_counts)) +
         ",hist_ood_sum=" + std::to_string(sum(h.ood_counts)) + '\n';
  return out;
}

EvalReport report_from_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  for (auto line : split_on(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.size() < 4 || lines[0] != "fpr95,auroc,acc,tau,n_id,n_ood" || lines[2] != "bin_lo,bin_hi,hist_id,hist_ood") {
    throw Error(ErrorKind::Parse, "report csv: unexpected layout");
  }
  const auto metrics = split_on(lines[1], ',');
  if (metrics.size() != 6) throw Error(ErrorKind::Parse, "report csv: metrics row needs 6 fields");
  EvalReport r;
  r.fpr95 = parse_field<double>(metrics[0]);
  r.auroc = parse_field<double>(metrics[1]);
  r.id_accuracy = parse_field<double>(metrics[2]);
  r.tau = parse_field<double>(metrics[3]);
  r.n_id = parse_field<std::size_t>(metrics[4]);
  r.n_ood = parse_field<std::size_t>(metrics[5]);

  const auto footer = lines.back();
  const std::string_view prefix = "# footer,hist_id_sum=";
  if (footer.substr(0, prefix.size()) != prefix) throw Error(ErrorKind::Parse, "report csv: missing footer");
  const auto footer_fields = split_on(footer.substr(prefix.size()), ',');
  const std::string_view ood_prefix = "hist_ood_sum=";
  if (footer_fields.size() != 2 || footer_fields[1].substr(0, ood_prefix.size()) != ood_prefix) {
    throw Error(ErrorKind::Parse, "report csv: malformed footer");
  }

  for (std::size_t i = 3; i + 1 < lines.size(); ++i) {
    const auto f = split_on(lines[i], ',');
    if (f.size() != 4) throw Error(ErrorKind::Parse, "report csv: histogram row needs 4 fields");
    if (r.histogram.bin_edges.empty()) r.histogram.bin_edges.push_back(parse_field<double>(f[0]));
    r.histogram.bin_edges.push_back(parse_field<double>(f[1]));
    r.histogram.id_counts.push_back(parse_field<std::size_t>(f[2]));
    r.histogram.ood_counts.push_back(parse_field<std::size_t>(f[3]));
  }
  check_histogram_sums(r, parse_field<std::size_t>(footer_fields[0]),
                       parse_field<std::size_t>(footer_fields[1].substr(ood_prefix.size())));
  return r;
}

void export_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format) {
  const std::string text = format == ReportFormat::Json ? report_to_json(report) : report_to_csv(report);
  detail::write_text_file(path, text);
}

EvalReport import_report(const std::filesystem::path& path, ReportFormat format) {
  const std::string text = detail::read_text_file(path);
  return format == ReportFormat::Json ? report_from_json(text) : report_from_csv(text);
}

}  // namespace dos
