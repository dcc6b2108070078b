#pragma once

#include <stdexcept>
#include <string>

namespace ncsr {

enum class ErrorKind {
  kInvalidArgument = 1,
  kShape = 2,
  kSingular = 3,
  kNumeric = 4,
  kConfig = 5,
  kIo = 6,
  kFormat = 7,
  kTrainingAborted = 8,
};

/// Base exception for everything thrown by the library. The C API maps
/// `kind()` onto its status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorKind::kShape, what) {}
};

class SingularError : public Error {
 public:
  SingularError(const std::string& what, int pivot) : Error(ErrorKind::kSingular, what), pivot_(pivot) {}
  int pivot() const noexcept { return pivot_; }

 private:
  int pivot_;
};

/// Non-finite value detected; `where()` names the layer that produced it.
class NumericError : public Error {
 public:
  NumericError(const std::string& where, const std::string& what)
      : Error(ErrorKind::kNumeric, what), where_(where) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(ErrorKind::kInvalidArgument, msg);
}

}  // namespace ncsr
