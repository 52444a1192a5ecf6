// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace wsmt {

// Flat key-value configuration. Section structure lives in key prefixes
// ("train.batch_size"), so a saved manifest is itself a loadable config.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config(const std::string& path);
void save_config(const ConfigMap& cfg, const std::string& path);

// Applies "key=value" entries, e.g. from command-line flags; later entries
// win, and every entry overrides the file value.
void apply_overrides(ConfigMap& cfg, const std::vector<std::string>& overrides);

bool has_key(const ConfigMap& cfg, const std::string& key);

std::string get_string(const ConfigMap& cfg, const std::string& key);
std::string get_string(const ConfigMap& cfg, const std::string& key,
                       const std::string& fallback);
long get_long(const ConfigMap& cfg, const std::string& key);
long get_long(const ConfigMap& cfg, const std::string& key, long fallback);
int get_int(const ConfigMap& cfg, const std::string& key);
int get_int(const ConfigMap& cfg, const std::string& key, int fallback);
std::uint64_t get_u64(const ConfigMap& cfg, const std::string& key,
                      std::uint64_t fallback);
double get_double(const ConfigMap& cfg, const std::string& key);
double get_double(const ConfigMap& cfg, const std::string& key, double fallback);
bool get_bool(const ConfigMap& cfg, const std::string& key, bool fallback);

}  // namespace wsmt
