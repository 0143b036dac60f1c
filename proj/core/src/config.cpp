#include "listenlab/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "listenlab/common.hpp"

namespace listenlab {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

KvConfig KvConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

KvConfig KvConfig::from_string(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(line_no) +
                            ": expected key=value, got: " + t);
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (key.empty())
      throw ValidationError("config line " + std::to_string(line_no) + ": empty key");
    if (cfg.kv_.count(key))
      throw ValidationError("config line " + std::to_string(line_no) + ": duplicate key: " + key);
    cfg.kv_[key] = val;
  }
  return cfg;
}

std::string KvConfig::get_str(const std::string& key, const std::string& fallback) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  used_.insert(key);
  return it->second;
}

int64_t KvConfig::get_i64(const std::string& key, int64_t fallback) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  used_.insert(key);
  char* end = nullptr;
  long long v = std::strtoll(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0')
    throw ValidationError("config key " + key + ": expected integer, got: " + it->second);
  return static_cast<int64_t>(v);
}

uint64_t KvConfig::get_u64(const std::string& key, uint64_t fallback) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  used_.insert(key);
  char* end = nullptr;
  unsigned long long v = std::strtoull(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0')
    throw ValidationError("config key " + key + ": expected unsigned integer, got: " + it->second);
  return static_cast<uint64_t>(v);
}

double KvConfig::get_f64(const std::string& key, double fallback) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  used_.insert(key);
  char* end = nullptr;
  double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0')
    throw ValidationError("config key " + key + ": expected number, got: " + it->second);
  return v;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  used_.insert(key);
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("config key " + key + ": expected boolean, got: " + v);
}

void KvConfig::finish() const {
  for (const auto& [key, value] : kv_)
    if (!used_.count(key)) throw ValidationError("unknown config key: " + key);
}

}  // namespace listenlab
