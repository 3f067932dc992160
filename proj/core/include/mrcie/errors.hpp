#pragma once

#include <stdexcept>
#include <string>

namespace mrcie {

enum class ErrorKind { Validation, Infeasible, Numeric };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

class InfeasibleError : public Error {
public:
  explicit InfeasibleError(const std::string& what) : Error(ErrorKind::Infeasible, what) {}
};

class NumericError : public Error {
public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

// CLI exit codes
inline int exit_code(ErrorKind k) {
  switch (k) {
  case ErrorKind::Validation: return 2;
  case ErrorKind::Infeasible: return 3;
  case ErrorKind::Numeric: return 4;
  }
  return 1;
}

} // namespace mrcie
