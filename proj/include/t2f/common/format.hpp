#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace t2f::fmt {

// Locale-independent fixed-point text, "-0.000000" folded to "0.000000" so
// output bytes do not depend on the sign of tiny values.
inline void append_fixed(std::string& out, double value, int decimals = 6) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, decimals);
  if (ec != std::errc{}) {
    out += "nan";
    return;
  }
  std::string_view s(buf, static_cast<std::size_t>(end - buf));
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string_view::npos) s.remove_prefix(1);
  out += s;
}

// 17 significant digits; always round-trips a double.
inline void append_exact(std::string& out, double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::scientific, 16);
  if (ec != std::errc{}) {
    out += "nan";
    return;
  }
  out.append(buf, end);
}

}  // namespace t2f::fmt
