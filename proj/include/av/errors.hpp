#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace av {

enum class ErrorCode {
  parse,
  constraint,
  mismatch,
  io,
  sandbox,
  config,
  empty_pool,
  pool_too_small,
  bad_k,
  backend,
  internal,
};

const char* error_code_name(ErrorCode code);

/// Base class for all library errors. The message names the offending
/// field or path where one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct ParseError : Error {
  explicit ParseError(const std::string& m) : Error(ErrorCode::parse, m) {}
};

struct ConstraintError : Error {
  explicit ConstraintError(const std::string& m) : Error(ErrorCode::constraint, m) {}
};

struct MismatchError : Error {
  explicit MismatchError(const std::string& m) : Error(ErrorCode::mismatch, m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ErrorCode::io, m) {}
};

/// Host-side sandbox fault (scratch dir creation, pipe failure, ...).
/// Guest failures are verdicts, never exceptions.
struct SandboxError : Error {
  explicit SandboxError(const std::string& m) : Error(ErrorCode::sandbox, m) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorCode::config, m) {}
};

struct EmptyPoolError : Error {
  explicit EmptyPoolError(const std::string& m) : Error(ErrorCode::empty_pool, m) {}
};

struct PoolTooSmallError : Error {
  explicit PoolTooSmallError(const std::string& m) : Error(ErrorCode::pool_too_small, m) {}
};

struct BadKError : Error {
  explicit BadKError(const std::string& m) : Error(ErrorCode::bad_k, m) {}
};

struct BackendError : Error {
  explicit BackendError(const std::string& m) : Error(ErrorCode::backend, m) {}
};

}  // namespace av
