#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wir {

// Failure buckets; the CLI maps them to exit codes (validation -> 2, numerical -> 3).
enum class ErrorKind { validation, numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

// malformed requests: bad sizes, empty inputs, unusable options
struct DimensionError : ValidationError { using ValidationError::ValidationError; };
struct InsufficientData : ValidationError { using ValidationError::ValidationError; };
struct InvalidSpec : ValidationError { using ValidationError::ValidationError; };
struct EmptyTrainingSet : ValidationError { using ValidationError::ValidationError; };
struct LengthMismatch : ValidationError { using ValidationError::ValidationError; };
struct FoldTooSmall : ValidationError { using ValidationError::ValidationError; };
struct NonPositiveLambda : ValidationError { using ValidationError::ValidationError; };

struct ParseError : ValidationError {
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : ValidationError(what + " (row " + std::to_string(row) + ", column " +
                        std::to_string(column) + ")"),
        row(row),
        column(column) {}
  explicit ParseError(const std::string& what) : ValidationError(what), row(0), column(0) {}
  std::size_t row, column;
};

struct MissingValue : ParseError {
  MissingValue(std::size_t row, std::size_t column) : ParseError("missing value", row, column) {}
};

// numerical breakdowns on structurally valid input
struct DegenerateBasis : NumericalError { using NumericalError::NumericalError; };
struct SingularInput : NumericalError { using NumericalError::NumericalError; };
struct ZeroTrace : NumericalError { using NumericalError::NumericalError; };
struct EigengapViolation : NumericalError { using NumericalError::NumericalError; };

struct ZeroVariance : NumericalError {
  explicit ZeroVariance(int index)
      : NumericalError("nonpositive variance at coordinate " + std::to_string(index)),
        index(index) {}
  int index;
};

}  // namespace wir
