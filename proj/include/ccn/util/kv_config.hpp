#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace ccn {

/// Key-value configuration text.
///
///   # comment
///   epochs = 30
///   model.use_bn = false
///   model.text_encoder = sentence_768
///
/// One `key = value` per line; blank lines and lines starting with '#' are
/// ignored. Keys are dotted paths into the JSON form of the settings object
/// and must already exist there. A value takes the type of the value it
/// replaces: true/false for booleans, decimal numbers, and strings taken
/// verbatim (surrounding double quotes are stripped). Repeating a key is an
/// error. Throws ConfigError naming the source and line.
nlohmann::json apply_kv_config(nlohmann::json base, std::string_view text, std::string_view source = "config");
nlohmann::json apply_kv_file(nlohmann::json base, const std::filesystem::path& path);

// One `key=value` assignment, as given on a command line.
nlohmann::json apply_kv_assignment(nlohmann::json base, std::string_view assignment);

// Every leaf of `j` as `key = value` lines in key order.
std::string to_kv_text(const nlohmann::json& j);

}  // namespace ccn
