#include "gradeforge/classroom/store.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fcntl.h>
#include <unistd.h>

#include "gradeforge/error.hpp"
#include "gradeforge/util/hash.hpp"

namespace gradeforge::classroom {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string manifest_of(const util::FileMap& files, std::vector<std::string>* hashes) {
  json m = json::object();
  for (const auto& [path, data] : files) {
    std::string h = util::sha256_hex(data);
    if (hashes) hashes->push_back(h);
    m[path] = h;
  }
  return m.dump();
}

void write_all(int fd, std::string_view data, const fs::path& path) {
  while (!data.empty()) {
    ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorKind::internal, "write " + path.string() + ": " + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

}  // namespace

std::string snapshot_hash(const util::FileMap& files) {
  return util::sha256_hex(manifest_of(files, nullptr));
}

BlobStore::BlobStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorKind::config, "cannot create blob directory " + dir_.string());
}

fs::path BlobStore::path_for(const std::string& hash) const {
  if (hash.size() != 64 || hash.find_first_not_of("0123456789abcdef") != std::string::npos) {
    throw Error(ErrorKind::internal, "malformed blob address '" + hash + "'");
  }
  return dir_ / hash.substr(0, 2) / hash;
}

std::string BlobStore::put(std::string_view data) {
  std::string hash = util::sha256_hex(data);
  fs::path target = path_for(hash);
  if (fs::exists(target)) return hash;
  fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp." + util::random_id();
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorKind::internal, "create " + tmp.string() + ": " + std::strerror(errno));
  try {
    write_all(fd, data, tmp);
    if (::fsync(fd) != 0) throw Error(ErrorKind::internal, "fsync " + tmp.string());
  } catch (...) {
    ::close(fd);
    fs::remove(tmp);
    throw;
  }
  ::close(fd);
  fs::rename(tmp, target);
  return hash;
}

bool BlobStore::contains(const std::string& hash) const { return fs::exists(path_for(hash)); }

std::string BlobStore::get(const std::string& hash) const {
  fs::path p = path_for(hash);
  if (!fs::exists(p)) throw Error(ErrorKind::internal, "missing blob " + hash);
  std::string data = util::read_file(p);
  if (util::sha256_hex(data) != hash) throw Error(ErrorKind::internal, "blob " + hash + " is corrupt");
  return data;
}

std::string BlobStore::put_snapshot(const util::FileMap& files) {
  for (const auto& [_, data] : files) put(data);
  return put(manifest_of(files, nullptr));
}

util::FileMap BlobStore::get_snapshot(const std::string& hash) const {
  json m = json::parse(get(hash));
  util::FileMap files;
  for (const auto& [path, blob] : m.items()) files[path] = get(blob.get<std::string>());
  return files;
}

EventLog::Loaded EventLog::load(const fs::path& path) {
  Loaded out;
  if (!fs::exists(path)) return out;
  const std::string text = util::read_file(path);
  std::size_t pos = 0, good_end = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    auto nl = text.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    std::string_view line(text.data() + pos, (terminated ? nl : text.size()) - pos);
    const std::size_t next = terminated ? nl + 1 : text.size();
    bool ok = false;
    json record;
    if (!line.empty()) {
      try {
        record = json::parse(line);
        ok = record.is_object() && record.contains("type");
      } catch (const json::parse_error&) {
      }
    }
    if (line.empty() && terminated) {
      pos = next;
      good_end = next;
      continue;
    }
    if (!ok) {
      const bool last = next >= text.size() ||
                        text.find_first_not_of("\n", next) == std::string::npos;
      if (!last) {
        throw Error(ErrorKind::config, "event log " + path.string() + " is corrupt at line " +
                                           std::to_string(line_no) + " (not the last record)");
      }
      fs::resize_file(path, good_end);
      out.warning = "event log " + path.string() + ": dropped corrupt trailing record at line " +
                    std::to_string(line_no) + " (" + std::to_string(text.size() - good_end) +
                    " bytes)";
      return out;
    }
    out.events.push_back(std::move(record));
    pos = next;
    good_end = next;
    if (!terminated) {
      // Complete record missing only its newline.
      int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
      if (fd >= 0) {
        write_all(fd, "\n", path);
        ::close(fd);
      }
    }
  }
  return out;
}

EventLog::EventLog(fs::path path) : path_(std::move(path)) {
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw Error(ErrorKind::config, "cannot open event log " + path_.string() + ": " +
                                       std::strerror(errno));
  }
}

EventLog::~EventLog() {
  if (fd_ >= 0) ::close(fd_);
}

json EventLog::append(const json& event) {
  std::string line = event.dump(-1, ' ', false, json::error_handler_t::replace);
  json canonical = json::parse(line);
  line.push_back('\n');
  const off_t before = ::lseek(fd_, 0, SEEK_END);
  try {
    write_all(fd_, line, path_);
    if (::fdatasync(fd_) != 0) throw Error(ErrorKind::internal, "fdatasync " + path_.string());
  } catch (...) {
    // Never leave a partial record in front of later appends.
    if (before >= 0 && ::ftruncate(fd_, before) != 0) std::perror("event log rollback");
    throw;
  }
  return canonical;
}

}  // namespace gradeforge::classroom
