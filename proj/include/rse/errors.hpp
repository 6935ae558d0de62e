#pragma once

#include <stdexcept>
#include <string>

namespace rse {

// Malformed input text (bad token, wrong field count). Carries the
// 1-based line number of the offending line.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& reason)
      : std::runtime_error("parse error at line " + std::to_string(line) +
                           ": " + reason),
        line_(line),
        reason_(reason) {}
  int line() const { return line_; }
  const std::string& reason() const { return reason_; }

 private:
  int line_;
  std::string reason_;
};

// Well-formed input that violates a model invariant (negative admittance
// magnitude, out-of-range index, duplicate entry).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rse
