#include "gradeforge/error.hpp"

namespace gradeforge {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::auth: return "auth";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::suite: return "suite";
    case ErrorKind::comparison: return "comparison";
    case ErrorKind::queue_full: return "queue_full";
    case ErrorKind::payload_too_large: return "payload_too_large";
    case ErrorKind::config: return "config";
    case ErrorKind::internal: return "internal";
  }
  return "internal";
}

}  // namespace gradeforge
