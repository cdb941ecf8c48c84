#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dialectrag/error.hpp"

namespace dialectrag::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNetwork = 4;

inline constexpr const char* kToolVersion = "0.1.0";

int exit_code_for(ErrorCode code) noexcept;

/// key = value lines; '#' starts a comment, [section] headers are ignored and
/// values may be double-quoted. Throws FileNotFound / FormatError.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Resolves a setting: flag, then environment variable, then config file.
class Settings {
 public:
  explicit Settings(std::map<std::string, std::string> file = {}) : file_(std::move(file)) {}

  std::optional<std::string> lookup(const std::optional<std::string>& flag, const char* env_name,
                                    const char* file_key) const;
  std::string get(const std::optional<std::string>& flag, const char* env_name, const char* file_key,
                  std::string fallback) const {
    return lookup(flag, env_name, file_key).value_or(std::move(fallback));
  }

 private:
  std::map<std::string, std::string> file_;
};

/// Runs one invocation; `args` excludes the program name. Never throws.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace dialectrag::cli
