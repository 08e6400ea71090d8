#pragma once

#include <string>

namespace ymca {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// Fixed-point text with `digits` decimals.
std::string format_fixed(double v, int digits);

}  // namespace ymca
