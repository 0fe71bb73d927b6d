#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cxdiag {

/// Precondition or domain violation (unknown state, disabled action, unsupported formula, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Syntax or semantic error in a textual input, with a 1-based location.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column)
      : std::runtime_error(format(message, line, column)), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& message, std::size_t line, std::size_t column) {
    return std::to_string(line) + ":" + std::to_string(column) + ": " + message;
  }

  std::size_t line_;
  std::size_t column_;
};

/// A configured budget was exceeded.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cxdiag
