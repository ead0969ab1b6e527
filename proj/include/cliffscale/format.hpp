#pragma once

#include <charconv>
#include <string>
#include <system_error>

#include "cliffscale/error.hpp"

namespace cliffscale {

/// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw DataError("cannot format number");
  return std::string(buf, end);
}

}  // namespace cliffscale
