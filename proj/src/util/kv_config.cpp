#include "ccn/util/kv_config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "ccn/errors.hpp"

namespace ccn {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

nlohmann::json typed_value(const nlohmann::json& old, std::string_view raw, const std::string& where) {
  auto fail = [&](const char* want) {
    return ConfigError(where + ": expected " + want + ", got '" + std::string(raw) + "'");
  };
  if (old.is_boolean()) {
    if (raw == "true") return true;
    if (raw == "false") return false;
    throw fail("true or false");
  }
  if (old.is_number_unsigned() || old.is_number_integer()) {
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (ec != std::errc() || end != raw.data() + raw.size()) throw fail("a non-negative integer");
    return v;
  }
  if (old.is_number_float()) {
    double v = 0;
    const auto [end, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (ec != std::errc() || end != raw.data() + raw.size()) throw fail("a number");
    return v;
  }
  if (old.is_string()) {
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') raw = raw.substr(1, raw.size() - 2);
    return std::string(raw);
  }
  throw ConfigError(where + ": key does not name a single value");
}

void assign(nlohmann::json& base, std::string_view key, std::string_view raw, const std::string& where) {
  if (key.empty()) throw ConfigError(where + ": missing key");
  nlohmann::json::json_pointer ptr;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    ptr /= std::string(key.substr(start, dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  if (!base.contains(ptr)) throw ConfigError(where + ": unknown key '" + std::string(key) + "'");
  base[ptr] = typed_value(base[ptr], raw, where + " (" + std::string(key) + ")");
}

void flatten(const nlohmann::json& j, const std::string& prefix, std::ostringstream& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    return;
  }
  out << prefix << " = " << (j.is_string() ? j.get<std::string>() : j.dump()) << '\n';
}

}  // namespace

nlohmann::json apply_kv_config(nlohmann::json base, std::string_view text, std::string_view source) {
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (!seen.insert(key).second) throw ConfigError(where + ": key '" + key + "' repeated");
    assign(base, key, trim(line.substr(eq + 1)), where);
  }
  return base;
}

nlohmann::json apply_kv_file(nlohmann::json base, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return apply_kv_config(std::move(base), s.str(), path.string());
}

nlohmann::json apply_kv_assignment(nlohmann::json base, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("--set expects key=value, got '" + std::string(assignment) + "'");
  assign(base, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), "--set");
  return base;
}

std::string to_kv_text(const nlohmann::json& j) {
  std::ostringstream out;
  flatten(j, "", out);
  return out.str();
}

}  // namespace ccn
