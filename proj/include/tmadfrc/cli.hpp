#pragma once

// Command-line driver. Exit codes: 0 success, 1 domain failure, 2 usage or I/O error.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tmadfrc/model.hpp"

namespace tmadfrc {

inline constexpr const char* kToolVersion = "0.1.0";

/// FNV-1a 64 of the canonical (sorted-key, compact) config JSON, as 16 hex digits.
std::string config_hash(const SystemConfig& cfg);

/// Applies "key=value" overrides; values are parsed as JSON literals. Throws ConfigError.
SystemConfig apply_overrides(SystemConfig cfg, const std::vector<std::string>& overrides);

/// Runs the tool with argv-style arguments (args[0] is the program name).
int run_cli(const std::vector<std::string>& args);

}  // namespace tmadfrc
