#include "ymca/format.hpp"

#include <array>
#include <charconv>
#include <cstdio>

namespace ymca {

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string format_fixed(double v, int digits) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.*f", digits, v);
  return std::string(buf.data());
}

}  // namespace ymca
