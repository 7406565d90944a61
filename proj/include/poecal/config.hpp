#pragma once

#include "poecal/core.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace poecal {

enum class ValueType { integer, real, text, real_list, boolean };

struct ConfigKey {
  std::string name;  // "section.key"
  ValueType type;
};

/// Flat sectioned key = value file:
///
///   # comment
///   [sampler]
///   annealing_steps = 50
///
/// Every key must appear in the schema; values are type-checked on load.
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text, const std::vector<ConfigKey>& schema,
                          const std::string& source = "<config>");
  static ConfigFile load(const std::filesystem::path& path, const std::vector<ConfigKey>& schema);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  // Each accessor throws ConfigError naming the key when it is absent.
  std::int64_t integer(const std::string& key) const;
  std::uint64_t unsigned_integer(const std::string& key) const;
  double real(const std::string& key) const;
  std::string text(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  bool boolean(const std::string& key) const;

 private:
  const std::string& raw(const std::string& key) const;
  std::map<std::string, std::string> values_;
  std::string source_;
};

/// Comma-separated reals; "1,0; 0,1" style lists split on ';' first.
std::vector<double> parse_real_list(const std::string& text, const std::string& key);
std::vector<std::vector<double>> parse_real_groups(const std::string& text, const std::string& key);

}  // namespace poecal
