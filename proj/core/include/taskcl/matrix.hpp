#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace taskcl {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A^T * B
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
// C = A * B^T
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

// Adds the 1 x cols row vector `bias` to every row of `m`.
void add_row_vector(Matrix& m, const Matrix& bias);
// 1 x cols vector of column sums.
Matrix column_sums(const Matrix& m);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
// Cosine similarity; 0 when either vector is all zeros.
double cosine(std::span<const double> a, std::span<const double> b);

// Divides each row by its L1 norm; all-zero rows stay zero.
void normalize_rows_l1(Matrix& m);
// Divides each row by its L2 norm; all-zero rows stay zero.
void normalize_rows_l2(Matrix& m);

// Neumaier-compensated accumulator, so reductions do not depend on grouping at
// the level of ordinary rounding error.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace taskcl
