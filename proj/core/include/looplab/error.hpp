#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace looplab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed graph operation: unknown node, bad edge.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Reference to a slot the artifact does not declare, or a malformed artifact.
class ArtifactError : public Error {
 public:
  using Error::Error;
};

/// A domain invariant would be violated (e.g. feedback attached twice).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Learning-template precondition failure, or an unrenderable message template.
class TemplateError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class EnvironmentError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A proposed delta was rejected; the message is suitable as feedback text.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class OptimizerError : public Error {
 public:
  OptimizerError(const std::string& what, bool retriable)
      : Error(what), retriable_(retriable) {}

  bool retriable() const noexcept { return retriable_; }

 private:
  bool retriable_;
};

/// Failure while running a slot body. Carries the slot and source position.
class ExecutionError : public Error {
 public:
  enum class Kind { parse, fuel, type, runtime };

  ExecutionError(Kind kind, std::string slot, std::size_t line,
                 std::size_t column, const std::string& detail,
                 std::uint64_t steps = 0);

  Kind kind() const noexcept { return kind_; }
  const std::string& slot() const noexcept { return slot_; }
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  const std::string& detail() const noexcept { return detail_; }
  /// Evaluation steps consumed before the failure.
  std::uint64_t steps() const noexcept { return steps_; }

 private:
  Kind kind_;
  std::string slot_;
  std::size_t line_;
  std::size_t column_;
  std::string detail_;
  std::uint64_t steps_;
};

const char* to_string(ExecutionError::Kind kind) noexcept;

}  // namespace looplab
