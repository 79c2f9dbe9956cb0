#pragma once

#include <stdexcept>
#include <string>

namespace segforge {

// Coarse failure class; the CLI maps these onto exit codes.
enum class ErrorKind {
  usage,    // bad arguments or configuration
  data,     // unreadable/malformed input files, shape contracts on user data
  runtime,  // everything else
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Tensor shape contract violation. Carries the name of the offending dimension.
class ShapeError : public Error {
 public:
  ShapeError(const std::string& op, const std::string& dimension, long long expected,
             long long actual)
      : Error(ErrorKind::data, op + ": dimension '" + dimension + "' expected " +
                                   std::to_string(expected) + ", got " + std::to_string(actual)),
        dimension_(dimension) {}
  ShapeError(const std::string& op, const std::string& dimension, const std::string& detail)
      : Error(ErrorKind::data, op + ": dimension '" + dimension + "' " + detail),
        dimension_(dimension) {}

  const std::string& dimension() const noexcept { return dimension_; }

 private:
  std::string dimension_;
};

inline Error usage_error(const std::string& msg) { return Error(ErrorKind::usage, msg); }
inline Error data_error(const std::string& msg) { return Error(ErrorKind::data, msg); }
inline Error runtime_error(const std::string& msg) { return Error(ErrorKind::runtime, msg); }

}  // namespace segforge
