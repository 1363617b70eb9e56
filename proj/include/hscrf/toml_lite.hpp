#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

namespace hscrf {

/// Parses the TOML subset used by the config files: comments, [tables],
/// [[arrays of tables]], dotted headers, strings, integers, floats, booleans,
/// arrays and inline tables. Errors are UsageError "name:line: message".
nlohmann::json parse_toml(const std::string& text, const std::string& name = "<toml>");
nlohmann::json read_toml_file(const std::filesystem::path& path);

}  // namespace hscrf
