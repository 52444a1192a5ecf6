// SPDX-License-Identifier: Apache-2.0
#include "wsmt/logging.hpp"

#include <cstdio>
#include <mutex>

namespace wsmt::log {

namespace {
Level g_level = Level::Info;
std::mutex g_mutex;

const char* level_name(Level l) {
  switch (l) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warn: return "warn";
    case Level::Error: return "error";
  }
  return "info";
}
}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

std::string quote(const std::string& v) {
  bool needs = v.empty();
  for (char c : v) {
    if (c == ' ' || c == '"' || c == '=' || c == '\n' || c == '\t') {
      needs = true;
      break;
    }
  }
  if (!needs) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void emit(Level level, const std::string& event, const Fields& fields) {
  if (static_cast<int>(level) < static_cast<int>(g_level)) return;
  std::string line = "level=";
  line += level_name(level);
  line += " event=";
  line += quote(event);
  for (const auto& [k, v] : fields) {
    line += ' ';
    line += k;
    line += '=';
    line += quote(v);
  }
  line += '\n';
  std::lock_guard<std::mutex> lock(g_mutex);
  std::fwrite(line.data(), 1, line.size(), stderr);
}

}  // namespace wsmt::log
