#pragma once

// Sparse feature selection: GBDT importance ranking followed by a validated
// sweep over nested prefixes of the ranking.

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ymca/bench.hpp"
#include "ymca/dataset.hpp"

namespace ymca {

/// Granularity of the candidate sweep.
inline constexpr std::size_t kSelectionBatch = 10;

/// 1 - SSE/SST. Throws DomainError when the truths have zero variance and
/// ShapeError on empty or mismatched input.
double r2_score(const Eigen::Ref<const Eigen::VectorXd>& predictions,
                const Eigen::Ref<const Eigen::VectorXd>& truths);

struct CandidateScore {
  std::size_t k = 0;
  std::size_t width = 0;  // process features plus corner columns
  double r2 = 0.0;
};

struct FeatureSelection {
  /// Process-parameter indices (zero-based) by descending importance.
  std::vector<Eigen::Index> ranking;
  /// Importance of every column of the D + p feature matrix.
  Eigen::VectorXd importances;
  std::vector<CandidateScore> curve;
  /// Chosen process-parameter indices in ranking order.
  std::vector<Eigen::Index> selected;
  /// Corner-encoding columns (indices D..D+p-1), always included.
  std::vector<Eigen::Index> forced;
  std::size_t best_k = 0;
  double r2 = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t split_seed = 0;
  std::size_t train_rows = 0;
  std::size_t validation_rows = 0;

  /// Selected process indices sorted ascending, the order used for x_S.
  std::vector<Eigen::Index> subset() const;
  std::size_t width() const { return selected.size() + forced.size(); }
};

struct SelectionLimits {
  std::size_t batch = kSelectionBatch;
  /// Upper bound on |S| + p; candidates beyond it are not evaluated.
  std::size_t max_width = std::numeric_limits<std::size_t>::max();
};

/// Ranks process parameters with a GBDT on the whole dataset, then for
/// k = 1..floor((D+p)/B) scores a fresh GBDT on the corner columns plus the
/// top k*B ranked parameters against a seeded, corner-stratified 80/20
/// split. Returns the best-R2 candidate (ties to smaller k). When D+p equals
/// B every feature is returned without evaluation. Throws
/// InsufficientDataError with fewer than 5 validation rows.
FeatureSelection select_features(const Dataset& data, const std::vector<CornerSpec>& corners,
                                 std::uint64_t seed, const SelectionLimits& limits = {});

/// Structured selection report: ranking, R2 curve, chosen subset and forced
/// columns, with one-based indices.
std::string selection_report_json(const FeatureSelection& selection);

}  // namespace ymca
