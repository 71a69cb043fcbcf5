#pragma once

// Run configuration files: flat `key = value` lines grouped under [env], [algo]
// and [output]. Lines starting with '#' are comments. Unknown sections or keys
// are errors, as are missing required keys.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace e2tc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigKey {
  std::string section;
  std::string key;
  bool required = false;
};

class Config {
 public:
  static Config parse(const std::string& text, const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);

  /// Rejects keys absent from `schema` and reports missing required ones.
  void validate(std::span<const ConfigKey> schema) const;

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  std::uint64_t get_uint(const std::string& section, const std::string& key) const;
  std::uint64_t get_uint(const std::string& section, const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  /// Comma-separated numbers.
  std::vector<double> get_list(const std::string& section, const std::string& key) const;

  const std::string& source() const { return source_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  const Entry& entry(const std::string& section, const std::string& key) const;
  [[noreturn]] void fail(const Entry& e, const std::string& section, const std::string& key,
                         const std::string& what) const;

  std::string source_;
  std::map<std::string, std::map<std::string, Entry>> values_;
};

}  // namespace e2tc
