#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "epplan/baselines.hpp"

namespace epplan {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sets one option from text, e.g. ("precision_min", "0.9") or
/// ("allowed_depths", "1,3"). Throws ConfigError for unknown keys or values
/// that do not parse as the key's type.
void apply_option(SystemOptions& options, std::string_view key, std::string_view value);

/// Applies "key=value" (surrounding whitespace ignored).
void apply_assignment(SystemOptions& options, std::string_view assignment);

/// Reads key=value lines; blank lines and lines starting with '#' are ignored.
void apply_config_file(SystemOptions& options, const std::filesystem::path& path);

/// Every option as key -> text, suitable for echoing into reports.
std::map<std::string, std::string> effective_config(const SystemOptions& options);

}  // namespace epplan
