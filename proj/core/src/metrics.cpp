#include "ymca/metrics.hpp"

#include <cmath>

#include "ymca/error.hpp"
#include "ymca/format.hpp"

namespace ymca {

std::string RelativeError::text() const { return capped ? "100+" : format_fixed(percent, 2); }

RelativeError relative_error(double estimate, double golden) {
  if (!(golden >= 0.0 && golden <= 1.0) || !(estimate >= 0.0 && estimate <= 1.0)) {
    throw DomainError("yields must lie in [0, 1]");
  }
  RelativeError e;
  if (golden == 0.0) {
    if (estimate == 0.0) return e;
    e.percent = 100.0;
    e.capped = true;
    return e;
  }
  e.percent = std::abs(estimate - golden) / golden * 100.0;
  if (e.percent > 100.0) {
    e.percent = 100.0;
    e.capped = true;
  }
  return e;
}

double mean_relative_error(std::span<const RelativeError> errors) {
  if (errors.empty()) return 0.0;
  double total = 0.0;
  for (const auto& e : errors) total += e.percent;
  return total / static_cast<double>(errors.size());
}

double speedup(double reference_samples, double method_samples) {
  if (!(method_samples > 0.0)) throw DomainError("speedup needs a positive method sample count");
  return reference_samples / method_samples;
}

}  // namespace ymca
