#pragma once

#include <stdexcept>
#include <string>

namespace evacsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed document. `line` is 1-based, 0 when unknown; `field` is a
/// JSON-pointer-like locus such as "exits[1].portal".
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::string field)
      : Error(what), line_(line), field_(std::move(field)) {}
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

/// Well-formed input that breaks a domain invariant; `invariant` names it.
class InvariantViolation : public Error {
 public:
  InvariantViolation(const std::string& invariant, const std::string& detail)
      : Error(invariant + ": " + detail), invariant_(invariant) {}
  const std::string& invariant() const { return invariant_; }

 private:
  std::string invariant_;
};

class OutOfBoundsError : public Error {
 public:
  using Error::Error;
};

class UnreachableError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace evacsim
