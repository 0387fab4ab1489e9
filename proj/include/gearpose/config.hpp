#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>

namespace gearpose {

/// Flat view of an INI-style config: `[section]` headers, `key = value`
/// lines, `#` or `;` comments. Keys are stored as "section.key"; keys before
/// any section header have no prefix. Later duplicates win.
class ConfigFile {
 public:
  static ConfigFile parse(std::istream& in);
  static ConfigFile parse_file(const std::filesystem::path& path);
  static ConfigFile parse_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// FNV-1a over the sorted key=value lines: stable across reordering and
/// comments, sensitive to any effective value change.
std::uint64_t config_hash(const ConfigFile& cfg);

/// Hash rendered as 16 hex digits.
std::string config_hash_hex(const ConfigFile& cfg);

}  // namespace gearpose
