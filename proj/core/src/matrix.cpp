#include "taskcl/matrix.hpp"

#include <cmath>
#include <sstream>

#include "taskcl/error.hpp"

namespace taskcl {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    std::ostringstream os;
    os << "matrix data size " << data_.size() << " does not match shape " << rows << "x" << cols;
    throw DataError(os.str());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) {
  for (auto& x : data_) x = v;
}

bool Matrix::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

static void require_shape(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) {
    std::ostringstream os;
    os << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x" << b.cols();
    throw DataError(os.str());
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require_shape(a.cols() == b.rows(), "matmul", a, b);
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto crow = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  require_shape(a.rows() == b.rows(), "matmul_at_b", a, b);
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto crow = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  require_shape(a.cols() == b.cols(), "matmul_a_bt", a, b);
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j));
  return c;
}

void add_row_vector(Matrix& m, const Matrix& bias) {
  require_shape(bias.rows() == 1 && bias.cols() == m.cols(), "add_row_vector", m, bias);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) r[j] += bias(0, j);
  }
}

Matrix column_sums(const Matrix& m) {
  Matrix s(1, m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) s(0, j) += r[j];
  }
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

void normalize_rows_l1(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    double s = 0.0;
    for (double x : r) s += std::abs(x);
    if (s == 0.0) continue;
    for (double& x : r) x /= s;
  }
}

void normalize_rows_l2(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    const double s = l2_norm(r);
    if (s == 0.0) continue;
    for (double& x : r) x /= s;
  }
}

void CompensatedSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x))
    comp_ += (sum_ - t) + x;
  else
    comp_ += (x - t) + sum_;
  sum_ = t;
}

}  // namespace taskcl
