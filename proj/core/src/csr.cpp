#include "taskcl/csr.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "taskcl/error.hpp"

namespace taskcl {

CsrMatrix::CsrMatrix(std::size_t rows, std::size_t cols, std::vector<std::uint64_t> offsets,
                     std::vector<std::uint32_t> indices, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      offsets_(std::move(offsets)),
      indices_(std::move(indices)),
      values_(std::move(values)) {
  validate();
}

void CsrMatrix::validate() const {
  if (offsets_.size() != rows_ + 1 || offsets_.front() != 0 || offsets_.back() != indices_.size() ||
      indices_.size() != values_.size())
    throw DataError("csr: inconsistent offsets/indices/values lengths");
  for (std::size_t r = 0; r < rows_; ++r) {
    if (offsets_[r] > offsets_[r + 1]) throw DataError("csr: offsets not monotone");
    for (auto k = offsets_[r]; k < offsets_[r + 1]; ++k) {
      if (indices_[k] >= cols_) throw DataError("csr: column index out of range");
      if (k > offsets_[r] && indices_[k] <= indices_[k - 1])
        throw DataError("csr: column indices not sorted/unique within row");
      if (!std::isfinite(values_[k])) throw DataError("csr: non-finite value");
    }
  }
}

CsrMatrix CsrMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::uint64_t> offsets(rows + 1, 0);
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  indices.reserve(triplets.size());
  values.reserve(triplets.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    if (t.row >= rows || t.col >= cols) throw DataError("csr: triplet out of range");
    if (!indices.empty() && i > 0 && triplets[i - 1].row == t.row && triplets[i - 1].col == t.col) {
      values.back() += t.value;
      continue;
    }
    indices.push_back(t.col);
    values.push_back(t.value);
    ++offsets[t.row + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) offsets[r + 1] += offsets[r];
  return CsrMatrix(rows, cols, std::move(offsets), std::move(indices), std::move(values));
}

CsrMatrix CsrMatrix::identity(std::size_t n) {
  std::vector<std::uint64_t> offsets(n + 1);
  std::vector<std::uint32_t> indices(n);
  for (std::size_t i = 0; i <= n; ++i) offsets[i] = i;
  for (std::size_t i = 0; i < n; ++i) indices[i] = static_cast<std::uint32_t>(i);
  return CsrMatrix(n, n, std::move(offsets), std::move(indices), std::vector<double>(n, 1.0));
}

double CsrMatrix::at(std::size_t r, std::size_t c) const {
  auto idx = row_indices(r);
  auto it = std::lower_bound(idx.begin(), idx.end(), static_cast<std::uint32_t>(c));
  if (it == idx.end() || *it != c) return 0.0;
  return values_[offsets_[r] + static_cast<std::size_t>(it - idx.begin())];
}

Matrix CsrMatrix::to_dense() const {
  Matrix m(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    auto idx = row_indices(r);
    auto val = row_values(r);
    for (std::size_t k = 0; k < idx.size(); ++k) m(r, idx[k]) = val[k];
  }
  return m;
}

Matrix spmm(const CsrMatrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    std::ostringstream os;
    os << "spmm: dimension mismatch " << a.rows() << "x" << a.cols() << " * " << b.rows() << "x" << b.cols();
    throw DataError(os.str());
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto idx = a.row_indices(r);
    auto val = a.row_values(r);
    auto crow = c.row(r);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto brow = b.row(idx[k]);
      const double v = val[k];
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += v * brow[j];
    }
  }
  return c;
}

Matrix spmm_transposed(const CsrMatrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    std::ostringstream os;
    os << "spmm_transposed: dimension mismatch " << a.rows() << "x" << a.cols() << "^T * " << b.rows() << "x"
       << b.cols();
    throw DataError(os.str());
  }
  Matrix c(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto idx = a.row_indices(r);
    auto val = a.row_values(r);
    auto brow = b.row(r);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto crow = c.row(idx[k]);
      const double v = val[k];
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += v * brow[j];
    }
  }
  return c;
}

}  // namespace taskcl
