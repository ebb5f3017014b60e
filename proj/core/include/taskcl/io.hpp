#pragma once

#include <filesystem>
#include <cstdint>
#include <iosfwd>
#include <string>

#include "taskcl/csr.hpp"
#include "taskcl/matrix.hpp"

namespace taskcl::io {

// Dense matrix: magic "TCLM", u64 rows, u64 cols, rows*cols little-endian
// float64 values, row-major.
void write_tclm(std::ostream& os, const Matrix& m);
Matrix read_tclm(std::istream& is, const std::string& origin);
void save_tclm(const std::filesystem::path& path, const Matrix& m);
Matrix load_tclm(const std::filesystem::path& path);

// Sparse matrix: magic "TCLS", u64 n, u64 nnz, (n+1) u64 offsets, nnz u32
// column indices, nnz float64 values. Square matrices only.
void write_tcls(std::ostream& os, const CsrMatrix& m);
CsrMatrix read_tcls(std::istream& is, const std::string& origin);
void save_tcls(const std::filesystem::path& path, const CsrMatrix& m);
CsrMatrix load_tcls(const std::filesystem::path& path);

// Little-endian scalar helpers shared by other binary formats.
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f64(std::ostream& os, double v);
std::uint32_t read_u32(std::istream& is, const std::string& origin);
std::uint64_t read_u64(std::istream& is, const std::string& origin);
double read_f64(std::istream& is, const std::string& origin);

}  // namespace taskcl::io
