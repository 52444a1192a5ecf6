// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace wsmt::log {

enum class Level { Debug, Info, Warn, Error };

using Fields = std::vector<std::pair<std::string, std::string>>;

// Minimum level actually emitted; records below it are dropped.
void set_level(Level level);
Level level();

// Emits one logfmt record (`level=info event=... k=v ...`) to stderr.
void emit(Level level, const std::string& event, const Fields& fields = {});

inline void info(const std::string& event, const Fields& fields = {}) {
  emit(Level::Info, event, fields);
}
inline void warn(const std::string& event, const Fields& fields = {}) {
  emit(Level::Warn, event, fields);
}
inline void error(const std::string& event, const Fields& fields = {}) {
  emit(Level::Error, event, fields);
}
inline void debug(const std::string& event, const Fields& fields = {}) {
  emit(Level::Debug, event, fields);
}

template <typename T>
std::string str(const T& v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// Quotes a logfmt value if it contains spaces, quotes or '='.
std::string quote(const std::string& v);

}  // namespace wsmt::log
