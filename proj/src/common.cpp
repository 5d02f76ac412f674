#include "reachabc/common.hpp"

#include <algorithm>

namespace reachabc {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::domain: return "domain";
    case ErrorCode::parameter: return "parameter";
    case ErrorCode::singularity: return "singularity";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::empty_scene: return "empty_scene";
    case ErrorCode::alignment: return "alignment";
    case ErrorCode::stale_cache: return "stale_cache";
    case ErrorCode::corrupt_model: return "corrupt_model";
    case ErrorCode::bad_magic: return "bad_magic";
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::training_divergence: return "training_divergence";
    case ErrorCode::incomplete_task: return "incomplete_task";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

bool Diagnostics::contains(const std::string& needle) const {
  return std::any_of(messages.begin(), messages.end(), [&](const std::string& m) {
    return m.find(needle) != std::string::npos;
  });
}

}  // namespace reachabc
