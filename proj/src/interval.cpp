#include "trajgov/interval.hpp"

#include <charconv>

#include "trajgov/error.hpp"

namespace trajgov {

namespace {

int parse_int(std::string_view s, std::string_view whole) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw Error(ErrorCode::ConfigError, "bad interval '" + std::string(whole) + "'");
  }
  return value;
}

}  // namespace

Interval parse_interval(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorCode::ConfigError, "interval needs the form a:b, got '" + std::string(text) + "'");
  }
  Interval iv{parse_int(text.substr(0, colon), text), parse_int(text.substr(colon + 1), text)};
  if (iv.first > iv.last) {
    throw Error(ErrorCode::ConfigError, "empty interval '" + std::string(text) + "'");
  }
  return iv;
}

std::string format_interval(const Interval& iv) {
  return std::to_string(iv.first) + ":" + std::to_string(iv.last);
}

}  // namespace trajgov
