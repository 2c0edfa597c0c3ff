#pragma once

#include <stdexcept>
#include <string>

namespace uag {

// Base class for all library errors. Subclass choice drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. Message carries the path and 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Precondition violation on an API call (bad arguments, invalid config).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Entity or relation label not present in the graph.
class LookupError : public Error {
 public:
  using Error::Error;
};

// Calibration could not produce a usable score set.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

// Embedding service failure (after retries).
class ProviderError : public Error {
 public:
  using Error::Error;
};

// Generation service failure (after retries).
class GeneratorError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure (unreadable/unwritable path).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace uag
