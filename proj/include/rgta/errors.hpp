#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rgta {

// Malformed input text. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : std::runtime_error(what), line_(0) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// An iterative solver hit its iteration cap before reaching tolerance.
class NonConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid experiment configuration (missing keys, unreadable dataset, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rgta
