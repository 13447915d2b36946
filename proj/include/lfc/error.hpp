#pragma once

#include <stdexcept>
#include <string>

namespace lfc {

// Base of every error raised by the library. The CLI maps the subclasses
// onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidStateError : public Error {
 public:
  using Error::Error;
};

// Raised when |Δf| exceeds the safety bound during integration.
class DivergedError : public Error {
 public:
  DivergedError(const std::string& what, double time)
      : Error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class TuningFailedError : public Error {
 public:
  using Error::Error;
};

}  // namespace lfc
