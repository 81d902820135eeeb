#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "septq/matrix.hpp"

namespace septq {

/// On-disk matrix encodings.
///
/// binary_f32: the 8-byte magic "SEPTQMAT", u32 rows and u32 cols (little
/// endian), then rows*cols little-endian IEEE-754 binary32 values, row-major.
/// csv: one matrix row per line, comma separated, '.' as decimal separator.
enum class MatrixFormat { binary_f32, csv };

inline constexpr std::string_view kMatrixMagic = "SEPTQMAT";

std::string_view to_string(MatrixFormat f) noexcept;
MatrixFormat parse_matrix_format(std::string_view s);

/// Picks the format from the file's first bytes (binary magic or CSV).
MatrixFormat detect_matrix_format(const std::filesystem::path& path);

Matrix read_matrix(const std::filesystem::path& path, MatrixFormat format);
void write_matrix(const Matrix& m, const std::filesystem::path& path,
                  MatrixFormat format);

// In-memory variants used by the file functions.
Matrix decode_binary_matrix(std::string_view bytes);
std::string encode_binary_matrix(const Matrix& m);
Matrix parse_csv_matrix(std::string_view text);
std::string format_csv_matrix(const Matrix& m);

/// Shortest text that parses back to exactly the same value.
std::string format_double(double v);
std::string format_float(float v);

/// Whole-file helpers; throw septq::Error on I/O failure.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace septq
