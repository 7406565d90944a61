#include "poecal/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace poecal {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_real(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("key '" + key + "' expects a number, got '" + t + "'", key);
  }
  return v;
}

std::int64_t parse_integer(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("key '" + key + "' expects an integer, got '" + t + "'", key);
  }
  return v;
}

bool parse_bool(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("key '" + key + "' expects true/false, got '" + t + "'", key);
}

}  // namespace

std::vector<double> parse_real_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(parse_real(cell, key));
  if (out.empty()) throw ConfigError("key '" + key + "' expects a non-empty list", key);
  return out;
}

std::vector<std::vector<double>> parse_real_groups(const std::string& text, const std::string& key) {
  std::vector<std::vector<double>> out;
  std::stringstream ss(text);
  std::string group;
  while (std::getline(ss, group, ';')) {
    if (trim(group).empty()) continue;
    out.push_back(parse_real_list(group, key));
  }
  if (out.empty()) throw ConfigError("key '" + key + "' expects at least one group", key);
  return out;
}

ConfigFile ConfigFile::parse(const std::string& text, const std::vector<ConfigKey>& schema,
                             const std::string& source) {
  ConfigFile cfg;
  cfg.source_ = source;
  std::map<std::string, ValueType> types;
  for (const auto& k : schema) types.emplace(k.name, k.type);

  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(std::string_view(body).substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string name = trim(std::string_view(body).substr(0, eq));
    const std::string key = section.empty() ? name : section + "." + name;
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto it = types.find(key);
    if (it == types.end()) throw ConfigError(where + ": unknown key '" + key + "'", key);
    if (cfg.values_.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'", key);
    switch (it->second) {
      case ValueType::integer: parse_integer(value, key); break;
      case ValueType::real: parse_real(value, key); break;
      case ValueType::real_list: parse_real_groups(value, key); break;
      case ValueType::boolean: parse_bool(value, key); break;
      case ValueType::text: break;
    }
    cfg.values_.emplace(key, value);
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path, const std::vector<ConfigKey>& schema) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), schema, path.string());
}

const std::string& ConfigFile::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(source_ + ": missing required key '" + key + "'", key);
  return it->second;
}

std::int64_t ConfigFile::integer(const std::string& key) const { return parse_integer(raw(key), key); }

std::uint64_t ConfigFile::unsigned_integer(const std::string& key) const {
  const std::string t = trim(raw(key));
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("key '" + key + "' expects a nonnegative integer, got '" + t + "'", key);
  }
  return v;
}

double ConfigFile::real(const std::string& key) const { return parse_real(raw(key), key); }
std::string ConfigFile::text(const std::string& key) const { return raw(key); }
std::vector<double> ConfigFile::reals(const std::string& key) const { return parse_real_list(raw(key), key); }
bool ConfigFile::boolean(const std::string& key) const { return parse_bool(raw(key), key); }

}  // namespace poecal
