#pragma once

#include <charconv>
#include <string>

namespace wir {

// shortest round-trip decimal form; stable across runs, locales, and threads
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace wir
