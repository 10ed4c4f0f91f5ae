#include "voxreg/matrix_io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "voxreg/errors.hpp"

namespace vxr {

namespace {

void append_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64_le(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

void append_f64_le(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  append_u64_le(out, bits);
}

double read_f64_le(const char* p) {
  const std::uint64_t bits = read_u64_le(p);
  double d;
  std::memcpy(&d, &bits, sizeof(d));
  return d;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void atomic_write_bytes(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail_runtime("io-error", "cannot open for writing: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail_runtime("io-error", "write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) fail_runtime("io-error", "rename failed for " + target.string() + ": " + ec.message());
}

void atomic_write_text(const std::string& path, const std::string& content) {
  atomic_write_bytes(path, content);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_validation("io-error", "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_matrix_binary(const std::string& path, const Matrix& m) {
  std::string bytes;
  bytes.reserve(24 + static_cast<std::size_t>(m.size()) * 8);
  bytes.append(kMatrixMagic, 8);
  append_u64_le(bytes, static_cast<std::uint64_t>(m.rows()));
  append_u64_le(bytes, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) append_f64_le(bytes, m(r, c));
  atomic_write_bytes(path, bytes);
}

Matrix read_matrix_binary(const std::string& path) {
  const std::string bytes = read_text_file(path);
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kMatrixMagic, 8) != 0)
    fail_validation("bad-matrix-file", "missing VXRMAT01 magic in " + path);
  const std::uint64_t rows = read_u64_le(bytes.data() + 8);
  const std::uint64_t cols = read_u64_le(bytes.data() + 16);
  const std::uint64_t expect = 24 + rows * cols * 8;
  if (bytes.size() != expect)
    fail_validation("bad-matrix-file",
                    "size mismatch in " + path + ": header says " + std::to_string(rows) + "x" + std::to_string(cols));
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const char* p = bytes.data() + 24;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c, p += 8) m(r, c) = read_f64_le(p);
  return m;
}

void write_matrix_csv(const std::string& path, const Matrix& m, const std::vector<std::string>& header) {
  if (static_cast<Eigen::Index>(header.size()) != m.cols())
    fail_validation("invalid-parameter", "csv header arity does not match column count");
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out.push_back(',');
    out += header[i];
  }
  out.push_back('\n');
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out.push_back(',');
      out += format_double(m(r, c));
    }
    out.push_back('\n');
  }
  atomic_write_text(path, out);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  for (auto& f : fields) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
    std::size_t lead = 0;
    while (lead < f.size() && f[lead] == ' ') ++lead;
    f.erase(0, lead);
  }
  return fields;
}

Matrix read_matrix_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail_validation("bad-matrix-file", "empty csv: " + path);
  const std::size_t cols = split_csv_line(line).size();
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != cols)
      fail_validation("bad-matrix-file", "ragged csv row in " + path + " at line " + std::to_string(rows + 2));
    for (const auto& f : fields) {
      double v;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size())
        fail_validation("bad-matrix-file", "non-numeric value '" + f + "' in " + path);
      values.push_back(v);
    }
    ++rows;
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * cols + c];
  return m;
}

Matrix read_matrix_any(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_validation("io-error", "cannot open file: " + path);
  char magic[8] = {};
  in.read(magic, 8);
  if (in.gcount() == 8 && std::memcmp(magic, kMatrixMagic, 8) == 0) return read_matrix_binary(path);
  return read_matrix_csv(path);
}

}  // namespace vxr
