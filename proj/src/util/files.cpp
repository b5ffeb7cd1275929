#include "gradeforge/util/files.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gradeforge/error.hpp"

namespace gradeforge::util {

namespace fs = std::filesystem;

std::string checked_relative_path(std::string_view path) {
  auto reject = [&](const char* why) -> std::string {
    throw Error(ErrorKind::validation,
                "rejected path '" + std::string(path) + "': " + why, "path");
  };
  if (path.empty()) reject("empty");
  if (path.front() == '/') reject("absolute path");
  if (path.find('\\') != std::string_view::npos) reject("backslash");
  if (path.find('\0') != std::string_view::npos) reject("NUL byte");
  std::string out;
  std::size_t start = 0;
  while (start <= path.size()) {
    std::size_t slash = path.find('/', start);
    if (slash == std::string_view::npos) slash = path.size();
    std::string_view part = path.substr(start, slash - start);
    if (part == "..") reject("path traversal");
    if (part.empty() || part == ".") {
      // Tolerate a trailing slash only; "a//b" and "./a" are not canonical.
      if (slash != path.size()) reject("empty or '.' component");
    } else {
      if (!out.empty()) out.push_back('/');
      out.append(part);
    }
    start = slash + 1;
  }
  if (out.empty()) reject("empty");
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::not_found, "cannot read file " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const fs::path& path, std::string_view data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::internal, "cannot write file " + path.string());
  }
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) {
    throw Error(ErrorKind::internal, "short write to " + path.string());
  }
}

FileMap read_tree(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw Error(ErrorKind::not_found, "not a directory: " + root.string());
  }
  FileMap files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::string rel = fs::relative(entry.path(), root).generic_string();
    files.emplace(checked_relative_path(rel), read_file(entry.path()));
  }
  return files;
}

namespace {

constexpr std::size_t kBlock = 512;

void put_octal(char* field, std::size_t width, std::uint64_t value) {
  // width includes the terminating NUL
  std::string digits(width - 1, '0');
  for (std::size_t i = width - 1; i-- > 0 && value;) {
    digits[i] = char('0' + (value & 7));
    value >>= 3;
  }
  std::memcpy(field, digits.data(), width - 1);
  field[width - 1] = '\0';
}

std::uint64_t get_octal(const char* field, std::size_t width) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) {
    char c = field[i];
    if (c == ' ' || c == '\0') {
      if (v) break;
      continue;
    }
    if (c < '0' || c > '7') {
      throw Error(ErrorKind::validation, "corrupt tar header");
    }
    v = (v << 3) | std::uint64_t(c - '0');
  }
  return v;
}

std::string header_field(const char* field, std::size_t width) {
  return std::string(field, strnlen(field, width));
}

void append_entry(std::string& out, const std::string& path,
                  std::string_view data, char type) {
  char header[kBlock] = {};
  std::string name = path;
  std::string prefix;
  if (name.size() > 100) {
    std::size_t cut = name.rfind('/', 155);
    if (cut == std::string::npos || name.size() - cut - 1 > 100) {
      throw Error(ErrorKind::validation, "path too long for archive: " + path);
    }
    prefix = name.substr(0, cut);
    name = name.substr(cut + 1);
  }
  std::memcpy(header, name.data(), name.size());
  put_octal(header + 100, 8, type == '5' ? 0755 : 0644);
  put_octal(header + 108, 8, 0);
  put_octal(header + 116, 8, 0);
  put_octal(header + 124, 12, data.size());
  put_octal(header + 136, 12, 0);
  std::memset(header + 148, ' ', 8);
  header[156] = type;
  std::memcpy(header + 257, "ustar", 6);
  std::memcpy(header + 263, "00", 2);
  std::memcpy(header + 345, prefix.data(), prefix.size());
  unsigned sum = 0;
  for (unsigned char c : header) sum += c;
  put_octal(header + 148, 7, sum);
  header[155] = ' ';
  out.append(header, kBlock);
  out.append(data);
  out.append((kBlock - data.size() % kBlock) % kBlock, '\0');
}

}  // namespace

std::string pack_tar(const FileMap& files) {
  std::string out;
  for (const auto& [path, data] : files) {
    append_entry(out, checked_relative_path(path), data, '0');
  }
  out.append(2 * kBlock, '\0');
  return out;
}

FileMap unpack_tar(std::string_view archive) {
  FileMap files;
  std::size_t pos = 0;
  std::string long_name;
  while (pos + kBlock <= archive.size()) {
    const char* h = archive.data() + pos;
    if (std::all_of(h, h + kBlock, [](char c) { return c == '\0'; })) break;
    std::uint64_t size = get_octal(h + 124, 12);
    char type = h[156];
    pos += kBlock;
    if (pos + size > archive.size()) {
      throw Error(ErrorKind::validation, "truncated tar archive");
    }
    std::string_view data = archive.substr(pos, size);
    pos += (size + kBlock - 1) / kBlock * kBlock;

    std::string name = header_field(h, 100);
    if (std::memcmp(h + 257, "ustar", 5) == 0) {
      std::string prefix = header_field(h + 345, 155);
      if (!prefix.empty()) name = prefix + "/" + name;
    }
    if (type == 'L') {  // GNU long name for the next entry
      long_name = header_field(data.data(), data.size());
      continue;
    }
    if (type == 'x') {  // pax extended header; only "path" is honoured
      std::string_view rec = data;
      while (!rec.empty()) {
        std::size_t sp = rec.find(' ');
        if (sp == std::string_view::npos) break;
        std::size_t len = std::stoul(std::string(rec.substr(0, sp)));
        if (len == 0 || len > rec.size()) break;
        std::string_view kv = rec.substr(sp + 1, len - sp - 2);
        if (kv.substr(0, 5) == "path=") long_name = std::string(kv.substr(5));
        rec.remove_prefix(len);
      }
      continue;
    }
    if (type == 'g') continue;
    if (!long_name.empty()) {
      name = std::move(long_name);
      long_name.clear();
    }
    if (type != '0' && type != '\0') continue;  // directories, links, devices
    while (name.size() >= 2 && name.compare(0, 2, "./") == 0) name.erase(0, 2);
    files[checked_relative_path(name)] = std::string(data);
  }
  return files;
}

}  // namespace gradeforge::util
