#include "septq/matrix_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

#include "septq/error.hpp"

namespace septq {
namespace {

constexpr std::size_t kHeaderBytes = 8 + 4 + 4;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i]))
         << (8 * i);
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view to_string(MatrixFormat f) noexcept {
  return f == MatrixFormat::binary_f32 ? "binary-f32" : "csv";
}

MatrixFormat parse_matrix_format(std::string_view s) {
  if (s == "binary-f32" || s == "binary") return MatrixFormat::binary_f32;
  if (s == "csv") return MatrixFormat::csv;
  throw ConfigError("unknown matrix format '" + std::string(s) +
                    "' (expected binary-f32 or csv)");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

MatrixFormat detect_matrix_format(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<char, kMatrixMagic.size()> head{};
  in.read(head.data(), head.size());
  if (in.gcount() == static_cast<std::streamsize>(head.size()) &&
      std::string_view(head.data(), head.size()) == kMatrixMagic)
    return MatrixFormat::binary_f32;
  return MatrixFormat::csv;
}

std::string encode_binary_matrix(const Matrix& m) {
  std::string out;
  out.reserve(kHeaderBytes + 4 * m.size());
  out.append(kMatrixMagic);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (const double v : m.values())
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Matrix decode_binary_matrix(std::string_view bytes) {
  if (bytes.size() < kMatrixMagic.size() ||
      bytes.substr(0, kMatrixMagic.size()) != kMatrixMagic)
    throw BadMagic("binary matrix does not start with SEPTQMAT");
  if (bytes.size() < kHeaderBytes)
    throw TruncatedPayload("binary matrix header is truncated");
  const std::uint32_t rows = get_u32(bytes, 8);
  const std::uint32_t cols = get_u32(bytes, 12);
  if (rows == 0 || cols == 0)
    throw FormatError("binary matrix declares an empty shape");
  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  const std::size_t expected = kHeaderBytes + 4 * count;
  if (bytes.size() < expected)
    throw TruncatedPayload("binary matrix payload has " +
                           std::to_string((bytes.size() - kHeaderBytes) / 4) +
                           " floats, header declares " + std::to_string(count));
  if (bytes.size() > expected)
    throw FormatError("binary matrix has trailing bytes after the payload");

  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const float f = std::bit_cast<float>(get_u32(bytes, kHeaderBytes + 4 * i));
    if (!std::isfinite(f)) throw FormatError("binary matrix contains a non-finite value");
    data[i] = static_cast<double>(f);
  }
  return Matrix(rows, cols, std::move(data));
}

Matrix parse_csv_matrix(std::string_view text) {
  std::vector<double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = (nl == std::string_view::npos) ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;

    std::size_t n = 0;
    while (true) {
      const std::size_t comma = line.find(',');
      const std::string_view cell = trim(line.substr(0, comma));
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() ||
          !std::isfinite(v))
        throw CsvParseError(line_no, n + 1, std::string(cell));
      data.push_back(v);
      ++n;
      if (comma == std::string_view::npos) break;
      line = line.substr(comma + 1);
    }
    if (rows == 0) {
      cols = n;
    } else if (n != cols) {
      throw FormatError("CSV line " + std::to_string(line_no) + " has " +
                        std::to_string(n) + " cells, expected " + std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) throw FormatError("CSV matrix is empty");
  return Matrix(rows, cols, std::move(data));
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string format_float(float v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string format_csv_matrix(const Matrix& m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out.push_back(',');
      out += format_double(m(r, c));
    }
    out.push_back('\n');
  }
  return out;
}

Matrix read_matrix(const std::filesystem::path& path, MatrixFormat format) {
  const std::string bytes = read_file(path);
  return format == MatrixFormat::binary_f32 ? decode_binary_matrix(bytes)
                                            : parse_csv_matrix(bytes);
}

void write_matrix(const Matrix& m, const std::filesystem::path& path,
                  MatrixFormat format) {
  write_file(path, format == MatrixFormat::binary_f32 ? encode_binary_matrix(m)
                                                      : format_csv_matrix(m));
}

}  // namespace septq
