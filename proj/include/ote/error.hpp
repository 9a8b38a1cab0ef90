#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ote {

/// Base of every error raised by the toolkit. Data errors (bad input files,
/// inconsistent corpora) derive from this; the CLI maps them to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input with an optional 1-based line number (0 = unknown).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Two distinct target spans in one sentence overlap.
class SpanConflict : public Error {
 public:
  SpanConflict(const std::string& sentence_id, const std::string& detail)
      : Error("conflicting target spans in sentence '" + sentence_id + "': " + detail),
        sentence_id_(sentence_id) {}

  const std::string& sentence_id() const noexcept { return sentence_id_; }

 private:
  std::string sentence_id_;
};

}  // namespace ote
