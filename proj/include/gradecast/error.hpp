#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace gradecast {

/// Base of every library error. `code()` is a stable machine token used by
/// the CLI exit-code mapping and the HTTP error body.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message, std::optional<std::size_t> row = std::nullopt)
      : std::runtime_error(message), code_(std::move(code)), row_(row) {}

  const std::string& code() const noexcept { return code_; }
  /// 1-based data row (header excluded) the error refers to, when known.
  std::optional<std::size_t> row() const noexcept { return row_; }

 private:
  std::string code_;
  std::optional<std::size_t> row_;
};

// Ingest
struct EmptyInputError : Error {
  explicit EmptyInputError(const std::string& msg) : Error("empty_input", msg) {}
};
struct SchemaError : Error {
  explicit SchemaError(const std::string& msg) : Error("schema_error", msg) {}
};
struct ParseError : Error {
  ParseError(const std::string& msg, std::size_t row) : Error("parse_error", msg, row) {}
};
struct LabelMappingError : Error {
  LabelMappingError(const std::string& msg, std::optional<std::size_t> row = std::nullopt)
      : Error("label_mapping", msg, row) {}
};
struct RangeError : Error {
  RangeError(const std::string& msg, std::size_t row) : Error("range_error", msg, row) {}
};
struct EmptyDatasetError : Error {
  explicit EmptyDatasetError(const std::string& msg) : Error("empty_dataset", msg) {}
};

// Modeling / evaluation
struct DomainError : Error {
  explicit DomainError(const std::string& msg) : Error("domain_error", msg) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error("config_error", msg) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& msg) : Error("format_error", msg) {}
};

}  // namespace gradecast
