#include "taskcl/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "taskcl/error.hpp"

namespace taskcl::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

void write_raw(std::ostream& os, const void* p, std::size_t n) { os.write(static_cast<const char*>(p), n); }

void read_raw(std::istream& is, void* p, std::size_t n, const std::string& origin) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw DataError(origin + ": truncated binary data");
}

void expect_magic(std::istream& is, const char* magic, const std::string& origin) {
  std::array<char, 4> buf{};
  read_raw(is, buf.data(), 4, origin);
  if (std::memcmp(buf.data(), magic, 4) != 0)
    throw DataError(origin + ": bad magic, expected " + std::string(magic, 4));
}

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) { write_raw(os, &v, sizeof v); }
void write_u64(std::ostream& os, std::uint64_t v) { write_raw(os, &v, sizeof v); }
void write_f64(std::ostream& os, double v) { write_raw(os, &v, sizeof v); }

std::uint32_t read_u32(std::istream& is, const std::string& origin) {
  std::uint32_t v;
  read_raw(is, &v, sizeof v, origin);
  return v;
}
std::uint64_t read_u64(std::istream& is, const std::string& origin) {
  std::uint64_t v;
  read_raw(is, &v, sizeof v, origin);
  return v;
}
double read_f64(std::istream& is, const std::string& origin) {
  double v;
  read_raw(is, &v, sizeof v, origin);
  return v;
}

void write_tclm(std::ostream& os, const Matrix& m) {
  write_raw(os, "TCLM", 4);
  write_u64(os, m.rows());
  write_u64(os, m.cols());
  write_raw(os, m.data().data(), m.size() * sizeof(double));
}

Matrix read_tclm(std::istream& is, const std::string& origin) {
  expect_magic(is, "TCLM", origin);
  const auto rows = read_u64(is, origin);
  const auto cols = read_u64(is, origin);
  if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) throw DataError(origin + ": implausible matrix shape");
  std::vector<double> data(rows * cols);
  read_raw(is, data.data(), data.size() * sizeof(double), origin);
  return Matrix(rows, cols, std::move(data));
}

void write_tcls(std::ostream& os, const CsrMatrix& m) {
  if (m.rows() != m.cols()) throw DataError("tcls: only square matrices are supported");
  write_raw(os, "TCLS", 4);
  write_u64(os, m.rows());
  write_u64(os, m.nnz());
  write_raw(os, m.offsets().data(), m.offsets().size() * sizeof(std::uint64_t));
  write_raw(os, m.indices().data(), m.indices().size() * sizeof(std::uint32_t));
  write_raw(os, m.values().data(), m.values().size() * sizeof(double));
}

CsrMatrix read_tcls(std::istream& is, const std::string& origin) {
  expect_magic(is, "TCLS", origin);
  const auto n = read_u64(is, origin);
  const auto nnz = read_u64(is, origin);
  if (n > (std::uint64_t{1} << 32) || nnz > (std::uint64_t{1} << 40)) throw DataError(origin + ": implausible header");
  std::vector<std::uint64_t> offsets(n + 1);
  std::vector<std::uint32_t> indices(nnz);
  std::vector<double> values(nnz);
  read_raw(is, offsets.data(), offsets.size() * sizeof(std::uint64_t), origin);
  read_raw(is, indices.data(), indices.size() * sizeof(std::uint32_t), origin);
  read_raw(is, values.data(), values.size() * sizeof(double), origin);
  return CsrMatrix(n, n, std::move(offsets), std::move(indices), std::move(values));
}

void save_tclm(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  write_tclm(os, m);
  if (!os) throw DataError("write failed: " + path.string());
}

Matrix load_tclm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path.string());
  return read_tclm(is, path.string());
}

void save_tcls(const std::filesystem::path& path, const CsrMatrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  write_tcls(os, m);
  if (!os) throw DataError("write failed: " + path.string());
}

CsrMatrix load_tcls(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path.string());
  return read_tcls(is, path.string());
}

}  // namespace taskcl::io
