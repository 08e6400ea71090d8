#pragma once

// Uncertainty-weighted boundary acquisition across corners with greedy
// spatially diversified batch selection.

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ymca/bench.hpp"
#include "ymca/surrogate.hpp"

namespace ymca {

/// sigma * phi((mean - spec) / sigma). Throws DomainError when sigma <= 0;
/// returns 0 for sigma below 1e-12.
double acquisition(double mean, double stddev, double spec);

struct JointAcquisition {
  double value = 0.0;
  std::size_t corner = 0;
};

/// Max over per-corner acquisition values, ties to the lowest index.
JointAcquisition joint_acquisition(std::span<const double> values);
/// Same, from one prediction per corner and the corner specs.
JointAcquisition joint_acquisition(std::span<const Prediction> predictions,
                                   std::span<const double> specs);

struct AcquisitionConfig {
  std::size_t pool_size = 10'000;
  std::size_t batch_size = 10;
  /// Penalty strength and width; derived per round when unset.
  std::optional<double> penalty_strength;
  std::optional<double> penalty_width;
};

struct BatchPick {
  std::size_t pool_index = 0;
  Eigen::VectorXd x;  // full D-dimensional point
  std::size_t corner = 0;
  double acquisition = 0.0;
  double penalty = 0.0;
};

struct SelectionLogRow {
  std::size_t step = 0;  // greedy pick index within the round
  std::size_t pool_index = 0;
  std::size_t corner = 0;
  double acquisition = 0.0;
  double penalty = 0.0;
  bool chosen = false;
};

struct BatchSelection {
  std::vector<BatchPick> picks;
  /// True when every acquisition was zero and picks fell back to max sigma.
  bool fallback = false;
  double penalty_strength = 0.0;
  double penalty_width = 0.0;
  /// Winner plus the best few runners-up at every greedy step.
  std::vector<SelectionLogRow> log;
};

/// Acquisition values of a fixed candidate pool, one column per corner.
struct PoolScores {
  Eigen::MatrixXd acquisition;  // C x K
  Eigen::MatrixXd stddev;       // C x K
};

PoolScores score_pool(const Posterior& posterior, const Eigen::Ref<const Eigen::MatrixXd>& pool,
                      std::span<const Eigen::Index> subset, const std::vector<CornerSpec>& corners,
                      std::span<const double> specs);

/// Greedy penalized selection from an already scored pool. Distances for the
/// penalty use only the `subset` coordinates.
BatchSelection select_from_pool(const PoolScores& scores, const Eigen::Ref<const Eigen::MatrixXd>& pool,
                                std::span<const Eigen::Index> subset, const AcquisitionConfig& config);

/// Draws a fresh pool from N(0, I_D) and selects a batch.
BatchSelection select_batch(const Posterior& posterior, Eigen::Index dimension,
                            std::span<const Eigen::Index> subset,
                            const std::vector<CornerSpec>& corners, std::span<const double> specs,
                            const AcquisitionConfig& config, std::uint64_t seed);

/// Median over pool points of the distance to their nearest neighbour,
/// measured on the `subset` coordinates.
double median_nearest_neighbor(const Eigen::Ref<const Eigen::MatrixXd>& pool,
                               std::span<const Eigen::Index> subset);

/// Delimited selection log with header
/// round,step,pool_index,corner,acquisition,penalty,chosen.
void write_selection_log_header(std::ostream& out);
void write_selection_log(std::ostream& out, std::size_t round, const BatchSelection& selection,
                         const std::vector<CornerSpec>& corners);

}  // namespace ymca
