#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rtb {

/// Base of every error raised by the toolkit. The subclasses map onto the
/// CLI exit codes, so callers can tell malformed input from data that parsed
/// but broke an invariant, and from a protocol that cannot run on valid data.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input text could not be parsed. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A value violates a domain-type invariant.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// An operation was called outside its precondition (bad argument, protocol
/// requirements not met by the dataset, missing cell, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// One rejected input record.
struct Diagnostic {
  std::size_t index = 0;  // position in the raw input
  std::size_t line = 0;   // source line, 0 when not read from a file
  std::string sample_id;
  std::string reason;

  std::string describe() const {
    std::string out;
    if (line != 0) out += "line " + std::to_string(line) + ": ";
    out += "sample '" + sample_id + "': " + reason;
    return out;
  }
};

/// Raised by strict manifest validation; carries every rejected record.
class ValidationError : public InvariantError {
 public:
  explicit ValidationError(std::vector<Diagnostic> diagnostics)
      : InvariantError(summarize(diagnostics)), diagnostics_(std::move(diagnostics)) {}

  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  static std::string summarize(const std::vector<Diagnostic>& diags) {
    if (diags.empty()) return "manifest validation failed";
    std::string out = diags.front().describe();
    if (diags.size() > 1) out += " (and " + std::to_string(diags.size() - 1) + " more rejected rows)";
    return out;
  }

  std::vector<Diagnostic> diagnostics_;
};

}  // namespace rtb
