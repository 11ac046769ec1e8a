#pragma once

#include <stdexcept>
#include <string>

namespace cqa {

// Error taxonomy shared across the toolkit. The CLI maps these to exit
// codes: ConfigError/IoError -> 2, SchemaError/IntegrityError/FormatError -> 3,
// NumericError -> 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input record; carries the 1-based line number of the offending row.
struct SchemaError : std::runtime_error {
  long line;
  SchemaError(const std::string& msg, long line_no)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + msg),
        line(line_no) {}
};

struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cqa
