#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace septq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

/// A Cholesky pivot was zero, negative or not a number.
class NotPositiveDefinite : public SingularMatrix {
 public:
  explicit NotPositiveDefinite(std::size_t pivot);
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// File format errors. Each malformation has its own type so callers (and the
// CLI exit codes) can tell them apart.
class FormatError : public Error {
 public:
  using Error::Error;
};

class BadMagic : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedPayload : public FormatError {
 public:
  using FormatError::FormatError;
};

class CsvParseError : public FormatError {
 public:
  CsvParseError(std::size_t line, std::size_t column, const std::string& cell);
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace septq
