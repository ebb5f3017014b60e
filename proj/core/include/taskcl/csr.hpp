#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "taskcl/matrix.hpp"

namespace taskcl {

// Compressed sparse row matrix. Column indices are sorted and unique within
// each row and all stored values are finite.
class CsrMatrix {
 public:
  struct Triplet {
    std::uint32_t row;
    std::uint32_t col;
    double value;
  };

  CsrMatrix() = default;
  CsrMatrix(std::size_t rows, std::size_t cols, std::vector<std::uint64_t> offsets,
            std::vector<std::uint32_t> indices, std::vector<double> values);

  // Builds from unordered triplets; duplicate coordinates are summed.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);
  static CsrMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::uint32_t> row_indices(std::size_t r) const {
    return {indices_.data() + offsets_[r], static_cast<std::size_t>(offsets_[r + 1] - offsets_[r])};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + offsets_[r], static_cast<std::size_t>(offsets_[r + 1] - offsets_[r])};
  }

  // Entry lookup by binary search; 0 when not stored.
  double at(std::size_t r, std::size_t c) const;

  const std::vector<std::uint64_t>& offsets() const noexcept { return offsets_; }
  const std::vector<std::uint32_t>& indices() const noexcept { return indices_; }
  const std::vector<double>& values() const noexcept { return values_; }

  Matrix to_dense() const;

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;

 private:
  void validate() const;

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint64_t> offsets_{0};
  std::vector<std::uint32_t> indices_;
  std::vector<double> values_;
};

// Sparse-dense product A * B.
Matrix spmm(const CsrMatrix& a, const Matrix& b);
// Sparse-dense product A^T * B.
Matrix spmm_transposed(const CsrMatrix& a, const Matrix& b);

}  // namespace taskcl
