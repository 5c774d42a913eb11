#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace d3re {

/// Base class for every error the toolkit reports to users.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed rule source; carries a 1-based source position.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Well-formed syntax that violates a program invariant (undeclared relation,
/// arity mismatch, unsafe variable, conflicting declaration).
class SemanticError : public ParseError {
 public:
  using ParseError::ParseError;
};

class StratificationError : public Error {
 public:
  StratificationError(const std::string& message, std::vector<std::string> cycle)
      : Error(message), cycle_(std::move(cycle)) {}

  const std::vector<std::string>& cycle() const { return cycle_; }

 private:
  std::vector<std::string> cycle_;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

class FactsError : public Error {
 public:
  using Error::Error;
};

class ElfError : public Error {
 public:
  enum class Kind { NotElf, Truncated, UnsupportedClass, UnsupportedEncoding, Io };

  ElfError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class StoreError : public Error {
 public:
  using Error::Error;
};

/// A session is already evaluating.
class SessionBusy : public Error {
 public:
  using Error::Error;
};

/// Non-fatal messages collected while parsing or loading.
struct Diagnostics {
  std::vector<std::string> warnings;

  void warn(std::string message) { warnings.push_back(std::move(message)); }
};

}  // namespace d3re
