#include "septq/error.hpp"

namespace septq {

NotPositiveDefinite::NotPositiveDefinite(std::size_t pivot)
    : SingularMatrix("matrix is not positive definite: pivot " +
                     std::to_string(pivot) + " is not positive"),
      pivot_(pivot) {}

CsvParseError::CsvParseError(std::size_t line, std::size_t column,
                             const std::string& cell)
    : FormatError("non-numeric CSV cell '" + cell + "' at line " +
                  std::to_string(line) + ", column " + std::to_string(column)),
      line_(line),
      column_(column) {}

}  // namespace septq
