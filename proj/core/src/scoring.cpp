#include "dos/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dos/error.hpp"

namespace dos {

namespace {

void require_width(std::span<const double> logits, std::size_t expected, bool exact, const char* what) {
  if (exact ? logits.size() != expected : logits.size() < expected) {
    throw Error(ErrorKind::Shape, std::string(what) + ": got " + std::to_string(logits.size()) + " logits, need " +
                                      (exact ? "" : "at least ") + std::to_string(expected));
  }
}

void check_batch(const Matrix& id_logits, std::span<const int> id_labels, const Matrix& ood_logits,
                 std::size_t num_classes) {
  if (num_classes == 0) throw Error(ErrorKind::InvalidInput, "need at least one class");
  if (id_logits.rows() != id_labels.size()) throw Error(ErrorKind::Shape, "ID logits and labels differ in length");
  if (id_logits.rows() > 0 && id_logits.cols() != num_classes + 1) {
    throw Error(ErrorKind::Shape, "ID logits need K+1 columns");
  }
  if (ood_logits.rows() > 0 && ood_logits.cols() != num_classes + 1) {
    throw Error(ErrorKind::Shape, "outlier logits need K+1 columns");
  }
  for (int y : id_labels) {
    if (y < 1 || static_cast<std::size_t>(y) > num_classes) {
      throw Error(ErrorKind::InvalidLabel, "label " + std::to_string(y) + " outside 1.." + std::to_string(num_classes));
    }
  }
}

// log-softmax over logits[0, width).
std::vector<double> log_softmax(std::span<const double> logits, std::size_t width) {
  const auto head = logits.first(width);
  const double lse = logsumexp(head);
  std::vector<double> out(width);
  for (std::size_t i = 0; i < width; ++i) out[i] = head[i] - lse;
  return out;
}

// Cross-entropy of ID rows against their labels over the first `width`
// logits; accumulates scale * dL/dlogits into grad.
double cross_entropy(const Matrix& logits, std::span<const int> labels, std::size_t width, Matrix& grad) {
  const std::size_t n = logits.rows();
  if (n == 0) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto lp = log_softmax(logits.row(r), width);
    const std::size_t y = static_cast<std::size_t>(labels[r] - 1);
    sum -= lp[y];
    auto g = grad.row(r);
    for (std::size_t c = 0; c < width; ++c) g[c] += inv_n * (std::exp(lp[c]) - (c == y ? 1.0 : 0.0));
  }
  return sum * inv_n;
}

LossValue combine(double id_term, double ood_term, double lambda) {
  return {id_term + lambda * ood_term, id_term, ood_term};
}

}  // namespace

std::string_view to_string(ScoreKind kind) noexcept {
  switch (kind) {
    case ScoreKind::Absent: return "absent";
    case ScoreKind::Msp: return "msp";
    case ScoreKind::Energy: return "energy";
  }
  return "absent";
}

ScoreKind parse_score_kind(std::string_view text) {
  if (text == "absent") return ScoreKind::Absent;
  if (text == "msp") return ScoreKind::Msp;
  if (text == "energy") return ScoreKind::Energy;
  throw Error(ErrorKind::Config, "unknown score '" + std::string(text) + "' (expected absent|msp|energy)");
}

std::string_view to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::AbsentCategory: return "absent_category";
    case LossKind::OeUniform: return "oe_uniform";
    case LossKind::Energy: return "energy";
  }
  return "absent_category";
}

LossKind parse_loss_kind(std::string_view text) {
  if (text == "absent_category") return LossKind::AbsentCategory;
  if (text == "oe_uniform") return LossKind::OeUniform;
  if (text == "energy") return LossKind::Energy;
  throw Error(ErrorKind::Config,
              "unknown loss '" + std::string(text) + "' (expected absent_category|oe_uniform|energy)");
}

double absent_probability(std::span<const double> logits, std::size_t num_classes) {
  require_width(logits, num_classes + 1, true, "absent_probability");
  return softmax(logits)[num_classes];
}

double absent_category_score(std::span<const double> logits, std::size_t num_classes) {
  require_width(logits, num_classes + 1, true, "absent_category_score");
  const auto p = softmax(logits);
  // Summing the ID mass keeps precision when p(K+1) is close to 1.
  double id_mass = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) id_mass += p[c];
  return std::clamp(id_mass, 0.0, 1.0);
}

double msp_score(std::span<const double> logits, std::size_t num_classes) {
  require_width(logits, num_classes, false, "msp_score");
  if (num_classes == 0) throw Error(ErrorKind::Shape, "msp_score needs K >= 1");
  const auto p = softmax(logits);
  return *std::max_element(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(num_classes));
}

double energy_score(std::span<const double> logits, std::size_t num_classes) {
  require_width(logits, num_classes, false, "energy_score");
  return logsumexp(logits.first(num_classes));
}

std::vector<double> score_rows(const Matrix& logits, std::size_t num_classes, ScoreKind kind) {
  std::vector<double> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    switch (kind) {
      case ScoreKind::Absent: out[r] = absent_category_score(logits.row(r), num_classes); break;
      case ScoreKind::Msp: out[r] = msp_score(logits.row(r), num_classes); break;
      case ScoreKind::Energy: out[r] = energy_score(logits.row(r), num_classes); break;
    }
  }
  return out;
}

std::vector<double> absent_probabilities(const Matrix& logits, std::size_t num_classes) {
  std::vector<double> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) out[r] = absent_probability(logits.row(r), num_classes);
  return out;
}

LossResult absent_category_loss(const Matrix& id_logits, std::span<const int> id_labels, const Matrix& ood_logits,
                                std::size_t num_classes, double lambda) {
  check_batch(id_logits, id_labels, ood_logits, num_classes);
  const std::size_t width = num_classes + 1;
  LossResult out{{}, Matrix(id_logits.rows(), width), Matrix(ood_logits.rows(), width)};
  const double id_term = cross_entropy(id_logits, id_labels, width, out.id_grad);

  double ood_term = 0.0;
  const std::size_t m = ood_logits.rows();
  if (m > 0) {
    const double scale = lambda / static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
      const auto lp = log_softmax(ood_logits.row(r), width);
      ood_term -= lp[num_classes];
      auto g = out.ood_grad.row(r);
      for (std::size_t c = 0; c < width; ++c) g[c] = scale * (std::exp(lp[c]) - (c == num_classes ? 1.0 : 0.0));
    }
    ood_term /= static_cast<double>(m);
  }
  out.value = combine(id_term, ood_term, lambda);
  return out;
}

LossResult oe_uniform_loss(const Matrix& id_logits, std::span<const int> id_labels, const Matrix& ood_logits,
                           std::size_t num_classes, double lambda) {
  check_batch(id_logits, id_labels, ood_logits, num_classes);
  const std::size_t width = num_classes + 1;
  LossResult out{{}, Matrix(id_logits.rows(), width), Matrix(ood_logits.rows(), width)};
  const double id_term = cross_entropy(id_logits, id_labels, num_classes, out.id_grad);

  double ood_term = 0.0;
  const std::size_t m = ood_logits.rows();
  if (m > 0) {
    const double k = static_cast<double>(num_classes);
    const double scale = lambda / static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
      const auto lp = log_softmax(ood_logits.row(r), num_classes);
      double row_loss = 0.0;
      for (double v : lp) row_loss -= v;
      ood_term += row_loss / k;
      auto g = out.ood_grad.row(r);
      for (std::size_t c = 0; c < num_classes; ++c) g[c] = scale * (std::exp(lp[c]) - 1.0 / k);
    }
    ood_term /= static_cast<double>(m);
  }
  out.value = combine(id_term, ood_term, lambda);
  return out;
}

LossResult energy_reg_loss(const Matrix& id_logits, std::span<const int> id_labels, const Matrix& ood_logits,
                           std::size_t num_classes, double m_in, double m_out, double lambda) {
  check_batch(id_logits, id_labels, ood_logits, num_classes);
  const std::size_t width = num_classes + 1;
  LossResult out{{}, Matrix(id_logits.rows(), width), Matrix(ood_logits.rows(), width)};
  const double id_term = cross_entropy(id_logits, id_labels, num_classes, out.id_grad);

  double ood_term = 0.0;
  // dE/dz_c = -q_c with q the softmax over the first K logits.
  const std::size_t m = ood_logits.rows();
  if (m > 0) {
    const double scale = lambda / static_cast<double>(m);
    double sum = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      const auto lp = log_softmax(ood_logits.row(r), num_classes);
      const double energy = -logsumexp(ood_logits.row(r).first(num_classes));
      const double hinge = std::max(0.0, m_out - energy);
      sum += hinge * hinge;
      auto g = out.ood_grad.row(r);
      for (std::size_t c = 0; c < num_classes; ++c) g[c] = scale * 2.0 * hinge * std::exp(lp[c]);
    }
    ood_term += sum / static_cast<double>(m);
  }
  const std::size_t n = id_logits.rows();
  if (n > 0) {
    const double scale = lambda / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const auto lp = log_softmax(id_logits.row(r), num_classes);
      const double energy = -logsumexp(id_logits.row(r).first(num_classes));
      const double hinge = std::max(0.0, energy - m_in);
      sum += hinge * hinge;
      auto g = out.id_grad.row(r);
      for (std::size_t c = 0; c < num_classes; ++c) g[c] -= scale * 2.0 * hinge * std::exp(lp[c]);
    }
    ood_term += sum / static_cast<double>(n);
  }
  out.value = combine(id_term, ood_term, lambda);
  return out;
}

}  // namespace dos
