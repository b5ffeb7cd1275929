#pragma once

#include <string>
#include <vector>

#include <sys/types.h>

namespace gradeforge::testing {

// Live (non-zombie) processes whose environment contains `marker`.
std::vector<pid_t> processes_with_env_marker(const std::string& marker);

}  // namespace gradeforge::testing
