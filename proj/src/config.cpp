#include "gearpose/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gearpose {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string strip_comment(const std::string& line) {
  const auto pos = line.find_first_of("#;");
  return pos == std::string::npos ? line : line.substr(0, pos);
}

}  // namespace

ConfigFile ConfigFile::parse(std::istream& in) {
  ConfigFile cfg;
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']' || body.size() < 3) {
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 ": malformed section header");
      }
      section = trim(body.substr(1, body.size() - 2));
      if (section.empty()) {
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 ": empty section name");
      }
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key = value");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": empty key");
    }
    cfg.values_[section.empty() ? key : section + "." + key] = value;
  }
  return cfg;
}

ConfigFile ConfigFile::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config: " + path.string());
  }
  return parse(in);
}

ConfigFile ConfigFile::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

bool ConfigFile::has(const std::string& key) const {
  return values_.count(key) > 0;
}

std::string ConfigFile::get_string(const std::string& key,
                                   const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

namespace {

template <typename T, typename Parse>
T parse_value(const std::string& key, const std::string& text, Parse parse,
              const char* expected) {
  try {
    std::size_t used = 0;
    const T v = parse(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': not " + expected +
                             ": " + text);
  }
}

}  // namespace

double ConfigFile::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return parse_value<double>(
      key, it->second,
      [](const std::string& s, std::size_t* used) { return std::stod(s, used); },
      "a number");
}

int ConfigFile::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return parse_value<int>(
      key, it->second,
      [](const std::string& s, std::size_t* used) { return std::stoi(s, used); },
      "an integer");
}

std::uint64_t ConfigFile::get_u64(const std::string& key,
                                  std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return parse_value<std::uint64_t>(
      key, it->second,
      [](const std::string& s, std::size_t* used) {
        return static_cast<std::uint64_t>(std::stoull(s, used));
      },
      "an integer");
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::runtime_error("config key '" + key + "': not a boolean: " + v);
}

std::uint64_t config_hash(const ConfigFile& cfg) {
  // std::map iterates sorted, so the digest is order-independent by
  // construction.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [key, value] : cfg.values()) {
    mix(key);
    mix("=");
    mix(value);
    mix("\n");
  }
  return h;
}

std::string config_hash_hex(const ConfigFile& cfg) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(config_hash(cfg)));
  return buf;
}

}  // namespace gearpose
