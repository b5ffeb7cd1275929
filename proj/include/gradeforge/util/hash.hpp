#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace gradeforge::util {

// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view data);

// First eight digest bytes of SHA-256, big-endian.
std::uint64_t sha256_prefix64(std::string_view data);

std::string base64_encode(std::string_view data);
// Throws Error(validation) on malformed input.
std::string base64_decode(std::string_view text);

// 128 random bits as hex, used for record and job identifiers.
std::string random_id();

}  // namespace gradeforge::util
