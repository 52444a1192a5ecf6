// SPDX-License-Identifier: Apache-2.0
#include "wsmt/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wsmt {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void insert_entry(ConfigMap& cfg, const std::string& raw, const std::string& where) {
  std::size_t eq = raw.find('=');
  if (eq == std::string::npos)
    throw std::runtime_error("config: missing '=' in " + where + ": " + trim(raw));
  std::string key = trim(raw.substr(0, eq));
  std::string value = trim(raw.substr(eq + 1));
  if (key.empty()) throw std::runtime_error("config: empty key in " + where);
  cfg[key] = value;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* kind) {
  throw std::runtime_error("config: key '" + key + "' has value '" + value +
                           "', expected " + kind);
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap cfg;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    insert_entry(cfg, line, "line " + std::to_string(lineno));
  }
  return cfg;
}

ConfigMap load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void save_config(const ConfigMap& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  for (const auto& [k, v] : cfg) out << k << " = " << v << '\n';
  if (!out) throw std::runtime_error("failed writing config file: " + path);
}

void apply_overrides(ConfigMap& cfg, const std::vector<std::string>& overrides) {
  for (const auto& entry : overrides) insert_entry(cfg, entry, "override");
}

bool has_key(const ConfigMap& cfg, const std::string& key) { return cfg.count(key) > 0; }

std::string get_string(const ConfigMap& cfg, const std::string& key) {
  auto it = cfg.find(key);
  if (it == cfg.end()) throw std::runtime_error("config: missing required key '" + key + "'");
  return it->second;
}

std::string get_string(const ConfigMap& cfg, const std::string& key,
                       const std::string& fallback) {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

long get_long(const ConfigMap& cfg, const std::string& key) {
  std::string v = get_string(cfg, key);
  char* end = nullptr;
  long out = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size()) bad_value(key, v, "an integer");
  return out;
}

long get_long(const ConfigMap& cfg, const std::string& key, long fallback) {
  return has_key(cfg, key) ? get_long(cfg, key) : fallback;
}

int get_int(const ConfigMap& cfg, const std::string& key) {
  return static_cast<int>(get_long(cfg, key));
}

int get_int(const ConfigMap& cfg, const std::string& key, int fallback) {
  return has_key(cfg, key) ? get_int(cfg, key) : fallback;
}

std::uint64_t get_u64(const ConfigMap& cfg, const std::string& key,
                      std::uint64_t fallback) {
  if (!has_key(cfg, key)) return fallback;
  std::string v = get_string(cfg, key);
  char* end = nullptr;
  unsigned long long out = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

double get_double(const ConfigMap& cfg, const std::string& key) {
  std::string v = get_string(cfg, key);
  char* end = nullptr;
  double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) bad_value(key, v, "a number");
  return out;
}

double get_double(const ConfigMap& cfg, const std::string& key, double fallback) {
  return has_key(cfg, key) ? get_double(cfg, key) : fallback;
}

bool get_bool(const ConfigMap& cfg, const std::string& key, bool fallback) {
  if (!has_key(cfg, key)) return fallback;
  std::string v = get_string(cfg, key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

}  // namespace wsmt
