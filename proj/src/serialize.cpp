#include "septq/serialize.hpp"

#include <charconv>
#include <cstdint>

#include "septq/error.hpp"
#include "septq/matrix_io.hpp"

namespace septq {
namespace {

constexpr std::size_t kCodesHeader = 8 + 4 + 4 + 1;

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

template <typename T>
T parse_number(std::string_view cell, std::size_t line, std::size_t col) {
  T v{};
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
    throw CsvParseError(line, col, std::string(cell));
  return v;
}

}  // namespace

std::string encode_codes(const CodeMatrix& codes) {
  std::string out;
  out.append(kCodesMagic);
  put_u32(out, static_cast<std::uint32_t>(codes.rows()));
  put_u32(out, static_cast<std::uint32_t>(codes.cols()));
  out.push_back(static_cast<char>(codes.bits()));

  const int bits = codes.bits();
  std::uint8_t byte = 0;
  int filled = 0;
  for (const std::uint8_t code : codes.codes()) {
    for (int b = bits - 1; b >= 0; --b) {
      byte = static_cast<std::uint8_t>((byte << 1) | ((code >> b) & 1u));
      if (++filled == 8) {
        out.push_back(static_cast<char>(byte));
        byte = 0;
        filled = 0;
      }
    }
  }
  if (filled > 0) out.push_back(static_cast<char>(byte << (8 - filled)));
  return out;
}

CodeMatrix decode_codes(std::string_view bytes) {
  if (bytes.size() < kCodesMagic.size() ||
      bytes.substr(0, kCodesMagic.size()) != kCodesMagic)
    throw BadMagic("code file does not start with SEPTQQNT");
  if (bytes.size() < kCodesHeader) throw TruncatedPayload("code file header is truncated");
  const std::uint32_t rows = get_u32(bytes, 8);
  const std::uint32_t cols = get_u32(bytes, 12);
  const int bits = static_cast<unsigned char>(bytes[16]);
  if (rows == 0 || cols == 0) throw FormatError("code file declares an empty shape");
  if (bits < 2 || bits > 8) throw FormatError("code file declares an invalid bit width");

  const std::size_t count = static_cast<std::size_t>(rows) * cols;
  const std::size_t payload = (count * static_cast<std::size_t>(bits) + 7) / 8;
  if (bytes.size() < kCodesHeader + payload)
    throw TruncatedPayload("code payload has " + std::to_string(bytes.size() - kCodesHeader) +
                           " bytes, header requires " + std::to_string(payload));
  if (bytes.size() > kCodesHeader + payload)
    throw FormatError("code file has trailing bytes after the payload");

  CodeMatrix codes(rows, cols, bits);
  std::size_t bit_pos = 0;
  for (auto& code : codes.codes()) {
    std::uint8_t v = 0;
    for (int b = 0; b < bits; ++b, ++bit_pos) {
      const auto byte = static_cast<unsigned char>(bytes[kCodesHeader + bit_pos / 8]);
      v = static_cast<std::uint8_t>((v << 1) | ((byte >> (7 - bit_pos % 8)) & 1u));
    }
    code = v;
  }
  return codes;
}

nlohmann::json grid_to_json(const QuantGrid& g) {
  nlohmann::json j;
  j["bits"] = g.bits;
  j["granularity"] = std::string(to_string(g.granularity));
  if (g.granularity == Granularity::per_matrix) {
    j["scale"] = g.scales.front();
    j["zero_point"] = g.zero_points.front();
  } else {
    j["scale"] = g.scales;
    j["zero_point"] = g.zero_points;
  }
  return j;
}

QuantGrid grid_from_json(const nlohmann::json& j) {
  try {
    const int bits = j.at("bits").get<int>();
    const Granularity gran = parse_granularity(j.at("granularity").get<std::string>());
    if (gran == Granularity::per_matrix)
      return QuantGrid::per_matrix(bits, j.at("scale").get<double>(),
                                   j.at("zero_point").get<int>());
    return QuantGrid::per_row(bits, j.at("scale").get<std::vector<double>>(),
                              j.at("zero_point").get<std::vector<int>>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed grid description: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed grid description: ") + e.what());
  }
}

std::string reserved_to_csv(std::span<const ReservedWeight> reserved) {
  std::string out = "row,col,value\n";
  for (const ReservedWeight& rw : reserved)
    out += std::to_string(rw.row) + ',' + std::to_string(rw.col) + ',' +
           format_float(static_cast<float>(rw.value)) + '\n';
  return out;
}

std::vector<ReservedWeight> reserved_from_csv(std::string_view text) {
  std::vector<ReservedWeight> out;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "row,col,value") throw FormatError("reserved list lacks its row,col,value header");
      header_seen = true;
      continue;
    }
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string_view::npos)
      throw FormatError("reserved list line " + std::to_string(line_no) + " needs 3 cells");
    const auto row = parse_number<std::uint32_t>(line.substr(0, c1), line_no, 1);
    const auto col = parse_number<std::uint32_t>(line.substr(c1 + 1, c2 - c1 - 1), line_no, 2);
    const auto value = parse_number<float>(line.substr(c2 + 1), line_no, 3);
    out.push_back({row, col, static_cast<double>(value)});
  }
  if (!header_seen) throw FormatError("reserved list is empty");
  return out;
}

Matrix StoredResult::reconstruct() const {
  Matrix out = dequantize_matrix(codes, grid);
  for (const ReservedWeight& rw : reserved) {
    if (rw.row >= out.rows() || rw.col >= out.cols())
      throw FormatError("reserved weight lies outside the code matrix");
    out(rw.row, rw.col) = rw.value;
  }
  return out;
}

void save_result(const QuantResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / kCodesFile, encode_codes(result.codes));
  write_json(dir / kGridFile, grid_to_json(result.grid));
  write_file(dir / kReservedFile, reserved_to_csv(result.reserved));
}

StoredResult load_result(const std::filesystem::path& dir) {
  StoredResult stored{decode_codes(read_file(dir / kCodesFile)),
                      grid_from_json(read_json(dir / kGridFile)),
                      reserved_from_csv(read_file(dir / kReservedFile))};
  try {
    stored.grid.validate(stored.codes.rows());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("grid.json: ") + e.what());
  }
  if (stored.grid.bits != stored.codes.bits())
    throw FormatError("grid and code file disagree on the bit width");
  return stored;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace septq
