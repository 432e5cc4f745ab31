#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "dos/numeric.hpp"

namespace dos {

// Scores follow the level-set convention: higher means more ID-like.
enum class ScoreKind { Absent, Msp, Energy };

std::string_view to_string(ScoreKind kind) noexcept;
ScoreKind parse_score_kind(std::string_view text);

// p(K+1 | x): softmax mass on the absent category (last logit).
double absent_probability(std::span<const double> logits, std::size_t num_classes);

// 1 - p(K+1 | x). logits must have exactly K+1 entries.
double absent_category_score(std::span<const double> logits, std::size_t num_classes);

// Softmax over all entries, max over the first K.
double msp_score(std::span<const double> logits, std::size_t num_classes);

// logsumexp of the first K logits (negative free energy).
double energy_score(std::span<const double> logits, std::size_t num_classes);

std::vector<double> score_rows(const Matrix& logits, std::size_t num_classes, ScoreKind kind);
std::vector<double> absent_probabilities(const Matrix& logits, std::size_t num_classes);

struct LossValue {
  double total = 0.0;
  double id_term = 0.0;
  double ood_term = 0.0;
};

// Loss value with dL/dlogits for both batches (same shapes as the inputs).
struct LossResult {
  LossValue value;
  Matrix id_grad;
  Matrix ood_grad;
};

enum class LossKind { AbsentCategory, OeUniform, Energy };

std::string_view to_string(LossKind kind) noexcept;
LossKind parse_loss_kind(std::string_view text);

// ID labels are 1-based class ids in {1..K}; logit column y-1 holds class y.

// mean_ID[-log p(y|x)] + lambda * mean_OOD[-log p(K+1|x)], softmax over K+1 logits.
LossResult absent_category_loss(const Matrix& id_logits, std::span<const int> id_labels, const Matrix& ood_logits,
                                std::size_t num_classes, double lambda = 1.0);

// K-way cross-entropy on ID plus lambda * mean_OOD[-(1/K) sum_c log q(c|x)],
// q the softmax over the first K logits. The absent logit gets zero gradient.
LossResult oe_uniform_loss(const Matrix& id_logits, std::span<const int> id_labels, const Matrix& ood_logits,
                           std::size_t num_classes, double lambda);

// K-way cross-entropy plus lambda * (mean_OOD[max(0, m_out - E)^2] + mean_ID[max(0, E - m_in)^2]),
// with E = -logsumexp(first K logits).
LossResult energy_reg_loss(const Matrix& id_logits, std::span<const int> id_labels, const Matrix& ood_logits,
                           std::size_t num_classes, double m_in, double m_out, double lambda);

}  // namespace dos
