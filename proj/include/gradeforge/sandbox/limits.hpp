#pragma once

#include <cstdint>

#include <json.hpp>

namespace gradeforge::sandbox {

// Hard limits for one sandboxed execution. All limits must be positive and
// cpu_seconds may not exceed wall_seconds.
struct ExecLimits {
  std::int64_t wall_seconds = 600;
  std::int64_t cpu_seconds = 10;
  std::int64_t memory_bytes = 512LL << 20;
  std::int64_t max_output_bytes = 1LL << 20;
  std::int64_t max_processes = 64;
  bool network_allowed = false;

  // Throws Error(validation) naming the first bad field.
  void validate() const;

  bool operator==(const ExecLimits&) const = default;
};

// Defaults for a test run derived from its timeout in minutes: wall clock is
// the timeout, CPU time is capped at min(10 s, wall).
ExecLimits limits_for_timeout(int timeout_minutes);

nlohmann::json to_json(const ExecLimits& l);
// Fields absent from `j` keep the values in `base`.
ExecLimits limits_from_json(const nlohmann::json& j, ExecLimits base);

}  // namespace gradeforge::sandbox
