#include "av/errors.hpp"

namespace av {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse: return "parse";
    case ErrorCode::constraint: return "constraint";
    case ErrorCode::mismatch: return "mismatch";
    case ErrorCode::io: return "io";
    case ErrorCode::sandbox: return "sandbox";
    case ErrorCode::config: return "config";
    case ErrorCode::empty_pool: return "empty_pool";
    case ErrorCode::pool_too_small: return "pool_too_small";
    case ErrorCode::bad_k: return "bad_k";
    case ErrorCode::backend: return "backend";
    case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

}  // namespace av
