#pragma once

namespace gradeforge {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace gradeforge
