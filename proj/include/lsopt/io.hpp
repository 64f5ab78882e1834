#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lsopt/common.hpp"

// Dense matrix/vector file formats.
//
// Binary: magic "LSMAT1", u64 rows, u64 cols (little endian), then row-major
// IEEE-754 little-endian f64 payload. Vectors are stored as n x 1 matrices.
//
// CSV: literal header line "rows,cols", a dimensions line "<r>,<c>", then one
// comma-separated line per matrix row. Import also accepts files whose first
// line is the dimensions pair directly.

namespace lsopt {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace detail {
inline constexpr char kMatrixMagic[6] = {'L', 'S', 'M', 'A', 'T', '1'};

inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
}  // namespace detail

inline void save_matrix_binary(std::ostream& os, const Matrix& M) {
  os.write(detail::kMatrixMagic, sizeof(detail::kMatrixMagic));
  detail::write_u64(os, static_cast<std::uint64_t>(M.rows()));
  detail::write_u64(os, static_cast<std::uint64_t>(M.cols()));
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) {
      const double v = M(i, j);
      os.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  if (!os) throw std::runtime_error("save_matrix_binary: write failed");
}

inline void save_matrix_binary(const std::string& path, const Matrix& M) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_matrix_binary: cannot open " + path);
  save_matrix_binary(os, M);
}

inline Matrix load_matrix_binary(std::istream& is) {
  char magic[6];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, detail::kMatrixMagic, sizeof(magic)) != 0)
    throw std::runtime_error("load_matrix_binary: bad magic (expected LSMAT1)");
  const auto rows = static_cast<Index>(detail::read_u64(is));
  const auto cols = static_cast<Index>(detail::read_u64(is));
  require_arg(rows >= 0 && cols >= 0, "load_matrix_binary: negative dimensions");
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      double v;
      is.read(reinterpret_cast<char*>(&v), sizeof(v));
      M(i, j) = v;
    }
  if (!is) throw std::runtime_error("load_matrix_binary: truncated payload");
  return M;
}

inline Matrix load_matrix_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_matrix_binary: cannot open " + path);
  return load_matrix_binary(is);
}

inline void save_vector_binary(const std::string& path, const Vector& v) {
  save_matrix_binary(path, Matrix(v));
}

inline Vector load_vector_binary(const std::string& path) {
  Matrix M = load_matrix_binary(path);
  if (M.cols() == 1) return M.col(0);
  if (M.rows() == 1) return M.row(0).transpose();
  throw std::runtime_error("load_vector_binary: " + path + " holds a " +
                           std::to_string(M.rows()) + "x" + std::to_string(M.cols()) +
                           " matrix, not a vector");
}

namespace detail {
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

inline std::string format_full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

inline void save_matrix_csv(std::ostream& os, const Matrix& M) {
  os << "rows,cols\n" << M.rows() << "," << M.cols() << "\n";
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (j) os << ",";
      os << detail::format_full(M(i, j));
    }
    os << "\n";
  }
}

inline void save_matrix_csv(const std::string& path, const Matrix& M) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_matrix_csv: cannot open " + path);
  save_matrix_csv(os, M);
}

inline Matrix load_matrix_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("load_matrix_csv: empty input");
  // Optional literal header.
  if (line.find("rows") != std::string::npos) {
    if (!std::getline(is, line)) throw std::runtime_error("load_matrix_csv: missing dimensions");
  }
  auto dims = detail::split_csv_line(line);
  if (dims.size() != 2) throw std::runtime_error("load_matrix_csv: bad dimensions line '" + line + "'");
  const auto rows = static_cast<Index>(std::stoll(dims[0]));
  const auto cols = static_cast<Index>(std::stoll(dims[1]));
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (!std::getline(is, line))
      throw std::runtime_error("load_matrix_csv: expected " + std::to_string(rows) +
                               " data rows, got " + std::to_string(i));
    auto fields = detail::split_csv_line(line);
    if (static_cast<Index>(fields.size()) != cols)
      throw std::runtime_error("load_matrix_csv: row " + std::to_string(i) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(cols));
    for (Index j = 0; j < cols; ++j) M(i, j) = std::stod(fields[static_cast<std::size_t>(j)]);
  }
  return M;
}

inline Matrix load_matrix_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_matrix_csv: cannot open " + path);
  return load_matrix_csv(is);
}

}  // namespace lsopt
