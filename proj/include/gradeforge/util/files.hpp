#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace gradeforge::util {

// Relative path -> file bytes. Ordered so that iteration is path order.
using FileMap = std::map<std::string, std::string>;

// Returns the canonical relative form of `path` or throws Error(validation)
// naming the path. Rejects absolute paths, empty, "." and ".." components,
// backslashes and NUL bytes.
std::string checked_relative_path(std::string_view path);

// Reads every regular file under `root` (recursively) into a FileMap.
FileMap read_tree(const std::filesystem::path& root);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);

// Minimal ustar archive support for template uploads.
std::string pack_tar(const FileMap& files);
FileMap unpack_tar(std::string_view archive);

}  // namespace gradeforge::util
