#include "snorm/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace snorm {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

Config Config::from_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value, got '" +
                        stripped + "'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    cfg.kv_[key] = value;
  }
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
  if (trim(key).empty()) throw ConfigError("override with empty key");
  kv_[trim(key)] = trim(value);
}

void Config::set_pair(const std::string& key_equals_value) {
  const size_t eq = key_equals_value.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + key_equals_value + "' is not key=value");
  set(key_equals_value.substr(0, eq), key_equals_value.substr(eq + 1));
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  accessed_.insert(key);
  auto it = kv_.find(key);
  const std::string value = it == kv_.end() ? fallback : it->second;
  resolved_[key] = value;
  return value;
}

std::string Config::require_string(const std::string& key) const {
  accessed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) throw ConfigError("missing required config key '" + key + "'");
  resolved_[key] = it->second;
  return it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  char buf[64];
  snprintf(buf, sizeof buf, "%.17g", fallback);
  const std::string value = get_string(key, buf);
  try {
    size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + value + "' is not a number");
  }
}

long Config::get_long(const std::string& key, long fallback) const {
  const std::string value = get_string(key, std::to_string(fallback));
  try {
    size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + value + "' is not an integer");
  }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const std::string value = get_string(key, std::to_string(fallback));
  try {
    size_t used = 0;
    const unsigned long long v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + value + "' is not an unsigned integer");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const std::string value = get_string(key, fallback ? "true" : "false");
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "': '" + value + "' is not a boolean");
}

std::string Config::resolved_text() const {
  std::string out;
  for (const auto& [k, v] : resolved_) {
    out += k;
    out += " = ";
    out += v;
    out += "\n";
  }
  return out;
}

std::vector<std::string> Config::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : kv_)
    if (accessed_.count(k) == 0) out.push_back(k);
  return out;
}

}  // namespace snorm
