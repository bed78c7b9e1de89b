#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fuelgen {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter is outside its admissible domain (e.g. rho <= 0).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (factorization, conditioning).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed or insufficient input data.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Text input could not be parsed; carries the 1-based line number.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : InputError(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Point placement exhausted its candidate budget.
class GenerationError : public Error {
 public:
  GenerationError(const std::string& what, double acceptance_rate)
      : Error(what), acceptance_rate_(acceptance_rate) {}

  double acceptance_rate() const noexcept { return acceptance_rate_; }

 private:
  double acceptance_rate_;
};

/// File could not be opened or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fuelgen
