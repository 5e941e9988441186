#pragma once

#include <stdexcept>
#include <string>

namespace dpf {

enum class ErrorKind {
  kInvalidArgument,
  kDataIntegrity,
  kNumericDegeneracy,
  kCapacity,
  kIntegrationFailure,
  kUnsupportedMode,
  kStepTooLarge,
  kTrainingDiverged,
  kInternal,
};

/// Base class for every error raised by the library. The kind drives the
/// CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorKind::kInvalidArgument, what) {}
};

class DataIntegrityError : public Error {
 public:
  explicit DataIntegrityError(const std::string& what) : Error(ErrorKind::kDataIntegrity, what) {}
};

class NumericDegeneracy : public Error {
 public:
  explicit NumericDegeneracy(const std::string& what) : Error(ErrorKind::kNumericDegeneracy, what) {}
};

class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& what) : Error(ErrorKind::kCapacity, what) {}
};

class IntegrationFailure : public Error {
 public:
  IntegrationFailure(double time, const std::string& what)
      : Error(ErrorKind::kIntegrationFailure, what + " (t = " + std::to_string(time) + ")"), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class UnsupportedMode : public Error {
 public:
  explicit UnsupportedMode(const std::string& what) : Error(ErrorKind::kUnsupportedMode, what) {}
};

class StepTooLarge : public Error {
 public:
  explicit StepTooLarge(const std::string& what) : Error(ErrorKind::kStepTooLarge, what) {}
};

class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(const std::string& what) : Error(ErrorKind::kTrainingDiverged, what) {}
};

class InternalError : public Error {
 public:
  explicit InternalError(const std::string& what) : Error(ErrorKind::kInternal, what) {}
};

/// Rethrows `e` as the same error class with `context` prefixed to the message.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& context) {
  const std::string what = context + ": " + e.what();
  switch (e.kind()) {
    case ErrorKind::kInvalidArgument: throw InvalidArgument(what);
    case ErrorKind::kDataIntegrity: throw DataIntegrityError(what);
    case ErrorKind::kNumericDegeneracy: throw NumericDegeneracy(what);
    case ErrorKind::kCapacity: throw CapacityError(what);
    case ErrorKind::kIntegrationFailure:
      throw IntegrationFailure(static_cast<const IntegrationFailure&>(e).time(), what);
    case ErrorKind::kUnsupportedMode: throw UnsupportedMode(what);
    case ErrorKind::kStepTooLarge: throw StepTooLarge(what);
    case ErrorKind::kTrainingDiverged: throw TrainingDiverged(what);
    case ErrorKind::kInternal: break;
  }
  throw InternalError(what);
}

}  // namespace dpf
