#include "e2tc/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace e2tc {

namespace {

const char* const kSections[] = {"env", "algo", "output"};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_number(const std::string& text, double& out) {
  if (text.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(text.c_str(), &end);
  return end == text.c_str() + text.size() && errno != ERANGE;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& source) {
  Config cfg;
  cfg.source_ = source;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (std::find(std::begin(kSections), std::end(kSections), section) == std::end(kSections))
        throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value', got '" + line + "'");
    if (section.empty()) throw ConfigError(where + "key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + "empty key");
    auto& sec = cfg.values_[section];
    if (sec.count(key)) throw ConfigError(where + "duplicate key '" + section + "." + key + "'");
    sec[key] = Entry{trim(line.substr(eq + 1)), line_no};
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void Config::validate(std::span<const ConfigKey> schema) const {
  for (const auto& [section, keys] : values_) {
    for (const auto& [key, e] : keys) {
      const bool known = std::any_of(schema.begin(), schema.end(), [&](const ConfigKey& k) {
        return k.section == section && k.key == key;
      });
      if (!known) fail(e, section, key, "unknown key");
    }
  }
  for (const ConfigKey& k : schema)
    if (k.required && !has(k.section, k.key))
      throw ConfigError(source_ + ": missing required key '" + k.section + "." + k.key + "'");
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto it = values_.find(section);
  return it != values_.end() && it->second.count(key) > 0;
}

const Config::Entry& Config::entry(const std::string& section, const std::string& key) const {
  if (!has(section, key)) throw ConfigError(source_ + ": missing required key '" + section + "." + key + "'");
  return values_.at(section).at(key);
}

void Config::fail(const Entry& e, const std::string& section, const std::string& key, const std::string& what) const {
  throw ConfigError(source_ + ":" + std::to_string(e.line) + ": " + what + " '" + section + "." + key + "'" +
                    (e.value.empty() ? "" : " (value '" + e.value + "')"));
}

std::string Config::get_string(const std::string& section, const std::string& key) const {
  return entry(section, key).value;
}

std::string Config::get_string(const std::string& section, const std::string& key, const std::string& fallback) const {
  return has(section, key) ? get_string(section, key) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key) const {
  const Entry& e = entry(section, key);
  double v = 0.0;
  if (!parse_number(e.value, v)) fail(e, section, key, "expected a number for");
  return v;
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
  return has(section, key) ? get_double(section, key) : fallback;
}

std::uint64_t Config::get_uint(const std::string& section, const std::string& key) const {
  const Entry& e = entry(section, key);
  if (e.value.empty() || e.value.find_first_not_of("0123456789") != std::string::npos)
    fail(e, section, key, "expected a non-negative integer for");
  errno = 0;
  const unsigned long long v = std::strtoull(e.value.c_str(), nullptr, 10);
  if (errno == ERANGE) fail(e, section, key, "integer out of range for");
  return v;
}

std::uint64_t Config::get_uint(const std::string& section, const std::string& key, std::uint64_t fallback) const {
  return has(section, key) ? get_uint(section, key) : fallback;
}

bool Config::get_bool(const std::string& section, const std::string& key) const {
  const Entry& e = entry(section, key);
  if (e.value == "true") return true;
  if (e.value == "false") return false;
  fail(e, section, key, "expected true or false for");
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  return has(section, key) ? get_bool(section, key) : fallback;
}

std::vector<double> Config::get_list(const std::string& section, const std::string& key) const {
  const Entry& e = entry(section, key);
  std::vector<double> out;
  std::istringstream in(e.value);
  std::string item;
  while (std::getline(in, item, ',')) {
    double v = 0.0;
    if (!parse_number(trim(item), v)) fail(e, section, key, "expected a comma-separated list of numbers for");
    out.push_back(v);
  }
  if (out.empty()) fail(e, section, key, "empty list for");
  return out;
}

}  // namespace e2tc
