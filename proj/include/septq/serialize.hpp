#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "septq/engine.hpp"
#include "septq/quant_grid.hpp"

namespace septq {

// A quantized layer on disk is a directory holding:
//   codes.qnt     "SEPTQQNT", u32 rows, u32 cols (little endian), u8 bits, then
//                 rows*cols codes packed most-significant-bit first, row-major,
//                 zero-padded to a whole byte
//   grid.json     {"bits", "scale", "zero_point", "granularity"}; per-row grids
//                 store scale and zero_point as arrays
//   reserved.csv  header "row,col,value", one reserved weight per line
// metrics.json and manifest.json are written next to them by the CLI.

inline constexpr std::string_view kCodesMagic = "SEPTQQNT";
inline constexpr const char* kCodesFile = "codes.qnt";
inline constexpr const char* kGridFile = "grid.json";
inline constexpr const char* kReservedFile = "reserved.csv";

std::string encode_codes(const CodeMatrix& codes);
CodeMatrix decode_codes(std::string_view bytes);

nlohmann::json grid_to_json(const QuantGrid& g);
QuantGrid grid_from_json(const nlohmann::json& j);

/// Values are written as the shortest text of their binary32 rounding.
std::string reserved_to_csv(std::span<const ReservedWeight> reserved);
std::vector<ReservedWeight> reserved_from_csv(std::string_view text);

struct StoredResult {
  CodeMatrix codes;
  QuantGrid grid;
  std::vector<ReservedWeight> reserved;

  /// W-hat as stored: dequantized codes with the reserved overlay.
  Matrix reconstruct() const;
};

void save_result(const QuantResult& result, const std::filesystem::path& dir);
StoredResult load_result(const std::filesystem::path& dir);

/// Pretty-printed JSON with a trailing newline; key order is deterministic.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace septq
