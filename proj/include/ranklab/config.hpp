#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ranklab/errors.hpp"

namespace ranklab {

/// Flat `key = value` configuration. `#` starts a comment; blank lines are
/// ignored; later assignments override earlier ones.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in, const std::string& origin = "<config>") {
    KeyValueConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto text = trim(line);
      if (text.empty()) continue;
      const auto eq = text.find('=');
      if (eq == std::string::npos)
        throw UsageError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      auto key = trim(text.substr(0, eq));
      if (key.empty()) throw UsageError(origin + ":" + std::to_string(lineno) + ": empty key");
      cfg.values_[key] = trim(text.substr(eq + 1));
    }
    return cfg;
  }

  static KeyValueConfig parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    return parse(in, path);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return to_double(key, it->second);
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    long long v = 0;
    const auto& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
      throw UsageError("config key '" + key + "': expected integer, got '" + s + "'");
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const auto& s = it->second;
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw UsageError("config key '" + key + "': expected boolean, got '" + s + "'");
  }

  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
    return out;
  }

  /// Keys not in `known`; used to reject typos.
  std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      bool found = false;
      for (const auto& n : known) found = found || n == k;
      if (!found) out.push_back(k);
    }
    return out;
  }

  std::string to_string() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
    return out.str();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static double to_double(const std::string& key, const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw UsageError("config key '" + key + "': expected number, got '" + s + "'");
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace ranklab
