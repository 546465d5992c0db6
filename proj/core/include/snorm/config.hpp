#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "snorm/errors.hpp"

namespace snorm {

// Flat key=value configuration with dotted keys, '#' comments and blank
// lines. Every read is recorded with its materialized default, so
// resolved_text() reproduces the complete effective configuration.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  // Overrides ("--set key=value" and sweep assignments).
  void set(const std::string& key, const std::string& value);
  void set_pair(const std::string& key_equals_value);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Sorted key=value lines of everything read so far, defaults included.
  std::string resolved_text() const;

  // Keys present in the file/overrides that nothing ever read.
  std::vector<std::string> unused_keys() const;

 private:
  std::map<std::string, std::string> kv_;
  mutable std::map<std::string, std::string> resolved_;
  mutable std::set<std::string> accessed_;
};

std::string trim(const std::string& s);

}  // namespace snorm
