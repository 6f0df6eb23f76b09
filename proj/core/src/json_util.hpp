#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "adaptermix/errors.hpp"

namespace adaptermix {

using json = nlohmann::json;

// Field access that raises ConfigError naming the dotted field path.

inline const json& require_field(const json& obj, const std::string& key,
                                 const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ConfigError("missing field '" + (path.empty() ? key : path + "." + key) +
                      "'");
  }
  return obj.at(key);
}

template <typename T>
T field_as(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require_field(obj, key, path);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("invalid value for field '" +
                      (path.empty() ? key : path + "." + key) + "'");
  }
}

template <typename T>
T field_or(const json& obj, const std::string& key, const std::string& path,
           T fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  return field_as<T>(obj, key, path);
}

inline json parse_json(const std::string& text, const std::string& what) {
  json parsed = json::parse(text, nullptr, false);
  if (parsed.is_discarded()) {
    throw ConfigError("malformed JSON in " + what);
  }
  return parsed;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write file '" + path + "'");
  out << text;
  if (!out) throw ConfigError("failed writing file '" + path + "'");
}

}  // namespace adaptermix
