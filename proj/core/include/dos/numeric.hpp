#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace dos {

// Row-major dense matrix of doubles. Feature matrices hold one sample per row.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  void fill(double value);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// a * b^T without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);
Matrix vstack(const Matrix& top, const Matrix& bottom);

std::vector<double> softmax(std::span<const double> logits);
double logsumexp(std::span<const double> logits);

inline constexpr double kDegenerateNorm = 1e-12;

// Throws ErrorKind::DegenerateVector when the norm is at or below kDegenerateNorm.
std::vector<double> l2_normalize(std::span<const double> v);
Matrix normalize_rows(const Matrix& m);

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;
bool all_finite(std::span<const double> values) noexcept;

// splitmix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) noexcept;

// xoshiro256** seeded through splitmix64. Every draw is built from integer
// operations so sequences match across platforms for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;
  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n) noexcept;
  // Standard normal (Marsaglia polar method).
  double normal() noexcept;

  // Independent generator for a sub-task; advances this generator by one draw.
  Rng split() noexcept;

  template <class T>
  void shuffle(std::vector<T>& values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[uniform_index(i)]);
    }
  }

  // k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dos
