#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gradeforge {

// Error categories shared by every module. The HTTP facade maps each kind to
// one status code, the CLI maps them to exit codes.
enum class ErrorKind {
  validation,
  auth,
  not_found,
  conflict,
  suite,
  comparison,
  queue_full,
  payload_too_large,
  config,
  internal,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string field = {})
      : std::runtime_error(message), kind_(kind), field_(std::move(field)) {}

  ErrorKind kind() const { return kind_; }
  // Name of the offending input field, empty when not attributable.
  const std::string& field() const { return field_; }

 private:
  ErrorKind kind_;
  std::string field_;
};

}  // namespace gradeforge
