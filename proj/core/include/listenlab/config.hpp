#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

namespace listenlab {

// Flat key=value config file. Lines are `key = value`; blank lines and lines
// starting with '#' are ignored. Consumers pull typed values with defaults;
// finish() rejects any key that was never consumed, so typos fail loudly.
class KvConfig {
 public:
  KvConfig() = default;
  static KvConfig from_file(const std::string& path);
  static KvConfig from_string(const std::string& text);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  std::string get_str(const std::string& key, const std::string& fallback);
  int64_t get_i64(const std::string& key, int64_t fallback);
  uint64_t get_u64(const std::string& key, uint64_t fallback);
  double get_f64(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);

  // Throws ValidationError naming the first unknown (never-consumed) key.
  void finish() const;

 private:
  std::map<std::string, std::string> kv_;
  std::set<std::string> used_;
};

}  // namespace listenlab
