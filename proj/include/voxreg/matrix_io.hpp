#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace vxr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Raw binary matrix format: 8-byte magic "VXRMAT01", then u64 rows, u64 cols,
// then rows*cols IEEE-754 doubles, row-major, all little-endian.
inline constexpr char kMatrixMagic[8] = {'V', 'X', 'R', 'M', 'A', 'T', '0', '1'};

void write_matrix_binary(const std::string& path, const Matrix& m);
Matrix read_matrix_binary(const std::string& path);

// Headered CSV: first row is column names, every later row has the same arity.
// Numbers are written with shortest round-trip formatting.
void write_matrix_csv(const std::string& path, const Matrix& m, const std::vector<std::string>& header);
Matrix read_matrix_csv(const std::string& path);

// Reads either format, deciding by the magic bytes.
Matrix read_matrix_any(const std::string& path);

std::string format_double(double v);

// Writes content to path via a temp file + rename in the same directory.
void atomic_write_text(const std::string& path, const std::string& content);
void atomic_write_bytes(const std::string& path, const std::string& bytes);

std::string read_text_file(const std::string& path);

// Splits one CSV line on commas (no quoting; values must not contain commas).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace vxr
