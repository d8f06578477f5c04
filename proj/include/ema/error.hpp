#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ema {

// Raised for malformed documents (flow files, records, configs, timestamps).
// `line` is 1-based and 0 when unknown; `field` is a JSON pointer or field name.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::string field = {}, std::size_t line = 0);

  const std::string& field() const noexcept { return field_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string field_;
  std::size_t line_;
};

}  // namespace ema
