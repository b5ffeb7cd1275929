#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gradeforge/sandbox/sandbox.hpp"

namespace gradeforge::sandbox {

// A runnable language. Command templates use {src} (the workspace's source
// files), {out} (stem of main_file) and {main} (stem for compiled languages,
// main_file for interpreted ones).
struct LanguageSpec {
  std::string id;
  std::string display_name;
  std::string source_extension;  // ".py"
  std::string main_file;         // file that ad-hoc source code is written to
  std::optional<std::string> compile_command;
  std::string run_command_template;
  std::string version_probe;

  bool compiled() const { return compile_command.has_value(); }
  std::string main_stem() const;
  std::string run_command() const;
};

class LanguageRegistry {
 public:
  LanguageRegistry() = default;

  // Array of {id, display_name, extension, compile?, run, probe, main_file?}.
  // Throws Error(config) on malformed entries or duplicate ids.
  static LanguageRegistry from_json(std::string_view text);
  static LanguageRegistry load_file(const std::string& path);
  // python3, c, cpp and java.
  static LanguageRegistry defaults();

  // Configuration order.
  const std::vector<LanguageSpec>& list() const { return languages_; }
  const LanguageSpec* find(std::string_view id) const;

 private:
  std::vector<LanguageSpec> languages_;
};

// Runs the compile step inside the sandbox for compiled languages. For
// interpreted ones returns Outcome::ok immediately with empty output.
ExecResult compile_if_needed(Sandbox& sandbox, const LanguageSpec& lang,
                             const Workspace& workspace, const ExecLimits& limits);

}  // namespace gradeforge::sandbox
