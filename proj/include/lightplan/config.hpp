#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lightplan {

/// Sectioned key=value configuration. Lines are `key = value` under
/// `[section]` headers; `#` starts a comment; blank lines ignored. Keys
/// before any header land in the "" section.
class ConfigFile {
 public:
  ConfigFile() = default;

  static ConfigFile parse_text(const std::string& text, const std::string& origin = "<text>") {
    ConfigFile cfg;
    cfg.text_ = text;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']' || t.size() < 3) {
          throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                   ": malformed section header '" + t + "'");
        }
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                 ": expected key = value, got '" + t + "'");
      }
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty()) {
        throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": empty key");
      }
      cfg.values_[section][key] = value;
    }
    return cfg;
  }

  static ConfigFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path);
  }

  bool has(const std::string& section, const std::string& key) const {
    const auto s = values_.find(section);
    return s != values_.end() && s->second.count(key) > 0;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    const auto s = values_.find(section);
    if (s == values_.end()) return fallback;
    const auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
  }

  std::string require_string(const std::string& section, const std::string& key) const {
    if (!has(section, key)) {
      throw std::runtime_error("config: missing [" + section + "] " + key);
    }
    return values_.at(section).at(key);
  }

  int get_int(const std::string& section, const std::string& key, int fallback) const {
    if (!has(section, key)) return fallback;
    return parse_int(section, key, values_.at(section).at(key));
  }

  double get_double(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) return fallback;
    return parse_double(section, key, values_.at(section).at(key));
  }

  bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = lower(values_.at(section).at(key));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::runtime_error("config: [" + section + "] " + key + ": '" + v +
                             "' is not a boolean");
  }

  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = values_.at(section).at(key);
    try {
      return std::stoull(v);
    } catch (const std::exception&) {
      throw std::runtime_error("config: [" + section + "] " + key + ": '" + v +
                               "' is not an unsigned integer");
    }
  }

  std::vector<int> get_int_list(const std::string& section, const std::string& key,
                                std::vector<int> fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<int> out;
    for (const std::string& item : split(values_.at(section).at(key), ',')) {
      out.push_back(parse_int(section, key, trim(item)));
    }
    return out;
  }

  std::vector<std::string> get_string_list(const std::string& section, const std::string& key,
                                           std::vector<std::string> fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<std::string> out;
    for (const std::string& item : split(values_.at(section).at(key), ',')) {
      const std::string t = trim(item);
      if (!t.empty()) out.push_back(t);
    }
    return out;
  }

  const std::string& text() const { return text_; }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

 private:
  static std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  }

  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == sep) {
        out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    out.push_back(cur);
    return out;
  }

  static int parse_int(const std::string& section, const std::string& key,
                       const std::string& v) {
    try {
      std::size_t used = 0;
      const int r = std::stoi(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (const std::exception&) {
      throw std::runtime_error("config: [" + section + "] " + key + ": '" + v +
                               "' is not an integer");
    }
  }

  static double parse_double(const std::string& section, const std::string& key,
                             const std::string& v) {
    try {
      std::size_t used = 0;
      const double r = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (const std::exception&) {
      throw std::runtime_error("config: [" + section + "] " + key + ": '" + v +
                               "' is not a number");
    }
  }

  std::map<std::string, std::map<std::string, std::string>> values_;
  std::string text_;
};

/// FNV-1a over the raw config text; stamped into every artifact so outputs
/// are traceable to the exact configuration that produced them.
inline std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

/// Seed override hook: LIPIDS_SEED in the environment beats the config value.
inline std::uint64_t seed_from_env(std::uint64_t config_seed) {
  const char* env = std::getenv("LIPIDS_SEED");
  if (env == nullptr || *env == '\0') return config_seed;
  try {
    return std::stoull(env);
  } catch (const std::exception&) {
    throw std::runtime_error("LIPIDS_SEED is set but not an unsigned integer: '" +
                             std::string(env) + "'");
  }
}

}  // namespace lightplan
