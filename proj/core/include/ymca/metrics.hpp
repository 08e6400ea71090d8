#pragma once

#include <span>
#include <string>

namespace ymca {

/// Relative yield error in percent. Capped at 100 and flagged when the
/// golden yield is zero but the estimate is not, or the ratio exceeds 100.
struct RelativeError {
  double percent = 0.0;
  bool capped = false;

  /// "100+" when capped, otherwise the percentage with two decimals.
  std::string text() const;
};

/// |estimate - golden| / golden * 100 for yields given as fractions in
/// [0, 1]; 0 when both are zero.
RelativeError relative_error(double estimate, double golden);

/// Mean of the per-corner percentages (capped values count as 100).
double mean_relative_error(std::span<const RelativeError> errors);

/// Brute-force Monte Carlo sample count divided by the method's count.
double speedup(double reference_samples, double method_samples);

}  // namespace ymca
