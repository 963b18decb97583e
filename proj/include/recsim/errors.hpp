#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace recsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input record. `line()` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

/// Bad model input: unknown item, empty history, too few candidates.
class ModelError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Fewer unseen candidates than the requested slate size.
class CandidateShortfall : public ModelError {
 public:
  CandidateShortfall(std::size_t requested, std::size_t available)
      : ModelError("need " + std::to_string(requested) +
                   " candidates but only " + std::to_string(available) +
                   " are available (short by " +
                   std::to_string(requested - available) + ")"),
        requested_(requested),
        available_(available) {}

  std::size_t requested() const noexcept { return requested_; }
  std::size_t available() const noexcept { return available_; }

 private:
  std::size_t requested_;
  std::size_t available_;
};

}  // namespace recsim
