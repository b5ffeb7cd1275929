#include "gradeforge/sandbox/limits.hpp"

#include <algorithm>

#include "gradeforge/error.hpp"

namespace gradeforge::sandbox {

void ExecLimits::validate() const {
  auto positive = [](std::int64_t v, const char* field) {
    if (v <= 0) {
      throw Error(ErrorKind::validation, std::string(field) + " must be positive", field);
    }
  };
  positive(wall_seconds, "wall_seconds");
  positive(cpu_seconds, "cpu_seconds");
  positive(memory_bytes, "memory_bytes");
  positive(max_output_bytes, "max_output_bytes");
  positive(max_processes, "max_processes");
  if (cpu_seconds > wall_seconds) {
    throw Error(ErrorKind::validation, "cpu_seconds may not exceed wall_seconds",
                "cpu_seconds");
  }
}

ExecLimits limits_for_timeout(int timeout_minutes) {
  ExecLimits l;
  l.wall_seconds = std::int64_t{timeout_minutes} * 60;
  l.cpu_seconds = std::min<std::int64_t>(10, l.wall_seconds);
  return l;
}

nlohmann::json to_json(const ExecLimits& l) {
  return {{"wall_seconds", l.wall_seconds},         {"cpu_seconds", l.cpu_seconds},
          {"memory_bytes", l.memory_bytes},         {"max_output_bytes", l.max_output_bytes},
          {"max_processes", l.max_processes},       {"network_allowed", l.network_allowed}};
}

ExecLimits limits_from_json(const nlohmann::json& j, ExecLimits base) {
  if (!j.is_object()) throw Error(ErrorKind::validation, "limits must be an object", "limits");
  auto read = [&](const char* key, std::int64_t& out) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return;
    if (!it->is_number_integer()) {
      throw Error(ErrorKind::validation, std::string(key) + " must be an integer", key);
    }
    out = it->get<std::int64_t>();
  };
  read("wall_seconds", base.wall_seconds);
  read("cpu_seconds", base.cpu_seconds);
  read("memory_bytes", base.memory_bytes);
  read("max_output_bytes", base.max_output_bytes);
  read("max_processes", base.max_processes);
  if (auto it = j.find("network_allowed"); it != j.end() && it->is_boolean()) {
    base.network_allowed = it->get<bool>();
  }
  base.validate();
  return base;
}

}  // namespace gradeforge::sandbox
