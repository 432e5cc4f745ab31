#include <doctest.h>

#include <cmath>
#include <functional>

#include "dos/error.hpp"
#include "dos/scoring.hpp"
#include "oracles.hpp"

using dos::Matrix;

namespace {

using LossFn = std::function<dos::LossResult(const Matrix&, const Matrix&)>;

// Central differences of the total loss w.r.t. every logit, compared with the
// analytic gradients.
void check_logit_gradients(const LossFn& loss, Matrix id, Matrix ood) {
  const auto analytic = loss(id, ood);
  const double h = 1e-6;
  auto probe = [&](Matrix& m, const Matrix& grad, bool is_id) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double keep = m.data()[i];
      m.data()[i] = keep + h;
      const double up = (is_id ? loss(m, ood) : loss(id, m)).value.total;
      m.data()[i] = keep - h;
      const double down = (is_id ? loss(m, ood) : loss(id, m)).value.total;
      m.data()[i] = keep;
      CHECK(grad.data()[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6).scale(1e-3));
    }
  };
  probe(id, analytic.id_grad, true);
  probe(ood, analytic.ood_grad, false);
}

}  // namespace

TEST_SUITE("scoring") {

TEST_CASE("scores agree with extended-precision references") {
  dos::Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> z(4);
    for (double& v : z) v = rng.uniform(-20, 20);
    const auto p = oracle::softmax(z);
    CHECK(dos::absent_probability(z, 3) == doctest::Approx(p[3]).epsilon(1e-12));
    CHECK(dos::absent_category_score(z, 3) == doctest::Approx(p[0] + p[1] + p[2]).epsilon(1e-12));
    CHECK(dos::msp_score(z, 3) == doctest::Approx(std::max({p[0], p[1], p[2]})).epsilon(1e-12));
    CHECK(dos::energy_score(z, 3) == doctest::Approx(oracle::logsumexp(std::span(z).first(3))).epsilon(1e-12));
  }
}

TEST_CASE("score properties") {
  dos::Rng rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> z(5);
    for (double& v : z) v = rng.uniform(-30, 30);
    const double s = dos::absent_category_score(z, 4);
    CHECK((s >= 0.0 && s <= 1.0));
    const double m = dos::msp_score(z, 4);
    CHECK(m <= 1.0);
    // Max over the first K of a (K+1)-way softmax: bounded below by the ID mass over K.
    CHECK(m >= s / 4.0 - 1e-15);
    auto bumped = z;
    bumped[4] += 1.0;
    CHECK(dos::absent_category_score(bumped, 4) <= s);
    auto shifted = z;
    for (std::size_t c = 0; c < 4; ++c) shifted[c] += 2.5;
    CHECK(dos::energy_score(shifted, 4) == doctest::Approx(dos::energy_score(z, 4) + 2.5).epsilon(1e-12));
  }
  CHECK(dos::energy_score(std::vector<double>{3.0, 9.0}, 1) == 3.0);
  CHECK_THROWS_AS(dos::absent_category_score(std::vector<double>{1, 2}, 3), dos::Error);
}

TEST_CASE("score and loss names round trip") {
  for (auto k : {dos::ScoreKind::Absent, dos::ScoreKind::Msp, dos::ScoreKind::Energy})
    CHECK(dos::parse_score_kind(dos::to_string(k)) == k);
  for (auto k : {dos::LossKind::AbsentCategory, dos::LossKind::OeUniform, dos::LossKind::Energy})
    CHECK(dos::parse_loss_kind(dos::to_string(k)) == k);
  CHECK_THROWS_AS(dos::parse_score_kind("odin"), dos::Error);
}

TEST_CASE("absent-category loss reference values") {
  const Matrix uniform(2, 4, 0.0);
  const std::vector<int> labels{1, 3};
  const auto r = dos::absent_category_loss(uniform, labels, uniform, 3);
  CHECK(r.value.id_term == doctest::Approx(std::log(4.0)));
  CHECK(r.value.ood_term == doctest::Approx(std::log(4.0)));

  const Matrix confident = Matrix::from_rows({{1000, 0, 0, 0}});
  const Matrix absent = Matrix::from_rows({{0, 0, 0, 1000}});
  const auto c = dos::absent_category_loss(confident, std::vector<int>{1}, absent, 3);
  CHECK(c.value.id_term < 1e-6);
  CHECK(c.value.ood_term < 1e-6);

  const auto empty = dos::absent_category_loss(uniform, labels, Matrix(0, 4), 3);
  CHECK(empty.value.ood_term == 0.0);
  CHECK_THROWS_AS(dos::absent_category_loss(uniform, std::vector<int>{0, 1}, uniform, 3), dos::Error);
  CHECK_THROWS_AS(dos::absent_category_loss(uniform, std::vector<int>{1, 4}, uniform, 3), dos::Error);
}

TEST_CASE("oe-uniform loss reference values") {
  const Matrix id(1, 4, 0.0);
  const Matrix ood = Matrix::from_rows({{2, 2, 2, -5}});
  const auto r = dos::oe_uniform_loss(id, std::vector<int>{2}, ood, 3, 0.5);
  CHECK(r.value.ood_term == doctest::Approx(std::log(3.0)));
  CHECK(r.value.id_term == doctest::Approx(std::log(3.0)));
  CHECK(r.value.total == doctest::Approx(1.5 * std::log(3.0)));
  const auto zero = dos::oe_uniform_loss(id, std::vector<int>{2}, ood, 3, 0.0);
  CHECK(zero.value.total == zero.value.id_term);
}

TEST_CASE("energy loss matches its direct formula") {
  dos::Rng rng(30);
  const Matrix id = oracle::random_matrix(3, 4, rng, 2.0), ood = oracle::random_matrix(2, 4, rng, 2.0);
  const std::vector<int> labels{1, 2, 3};
  const double m_in = -1, m_out = 1, lambda = 0.3;
  const auto r = dos::energy_reg_loss(id, labels, ood, 3, m_in, m_out, lambda);
  double ce = 0, reg_in = 0, reg_out = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double lse = oracle::logsumexp(id.row(i).first(3));
    ce += lse - id(i, labels[i] - 1);
    reg_in += std::pow(std::max(0.0, -lse - m_in), 2);
  }
  for (std::size_t i = 0; i < 2; ++i) reg_out += std::pow(std::max(0.0, m_out + oracle::logsumexp(ood.row(i).first(3))), 2);
  CHECK(r.value.id_term == doctest::Approx(ce / 3));
  CHECK(r.value.ood_term == doctest::Approx(reg_out / 2 + reg_in / 3));
  CHECK(r.value.total == doctest::Approx(ce / 3 + lambda * (reg_out / 2 + reg_in / 3)));

  // Energies far beyond both margins: hinge inactive.
  const Matrix id_far = Matrix::from_rows({{50, 0, 0, 0}});
  const Matrix ood_far = Matrix::from_rows({{-50, -50, -50, 0}});
  CHECK(dos::energy_reg_loss(id_far, std::vector<int>{1}, ood_far, 3, m_in, m_out, 1.0).value.ood_term == 0.0);
  const auto plain = dos::energy_reg_loss(id, labels, ood, 3, m_in, m_out, 0.0);
  CHECK(plain.value.total == plain.value.id_term);
}

TEST_CASE("loss gradients match central differences on logits") {
  dos::Rng rng(31);
  const std::vector<int> labels{1, 3, 2, 2};
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix id = oracle::random_matrix(4, 4, rng, 1.5), ood = oracle::random_matrix(3, 4, rng, 1.5);
    check_logit_gradients([&](const Matrix& a, const Matrix& b) { return dos::absent_category_loss(a, labels, b, 3, 0.7); }, id, ood);
    check_logit_gradients([&](const Matrix& a, const Matrix& b) { return dos::oe_uniform_loss(a, labels, b, 3, 0.5); }, id, ood);
    check_logit_gradients([&](const Matrix& a, const Matrix& b) { return dos::energy_reg_loss(a, labels, b, 3, -1, 1, 0.4); }, id, ood);
  }
}

}
