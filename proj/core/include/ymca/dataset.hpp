#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "ymca/bench.hpp"

namespace ymca {

/// Labeled simulations ((x, c), y) accumulated across corners. Rows always
/// hold the full D-dimensional process vector; projection onto a feature
/// subset happens when building surrogate inputs.
struct Dataset {
  Eigen::MatrixXd x;                // N x D
  std::vector<std::size_t> corner;  // N corner indices
  Eigen::VectorXd y;                // N

  std::size_t size() const { return corner.size(); }
  bool empty() const { return corner.empty(); }
  Eigen::Index dimension() const { return x.cols(); }

  void append(const Eigen::Ref<const Eigen::MatrixXd>& rows,
              std::span<const std::size_t> corners, const Eigen::Ref<const Eigen::VectorXd>& ys);
  Dataset subset(std::span<const std::size_t> rows) const;
  /// Row indices belonging to corner k.
  std::vector<std::size_t> rows_of(std::size_t k) const;
};

/// Joint surrogate input z = [x_S, c] (one row per dataset entry).
Eigen::MatrixXd joint_inputs(const Dataset& data, std::span<const Eigen::Index> subset,
                             const std::vector<CornerSpec>& corners);

/// Joint inputs for arbitrary process rows evaluated at a single corner.
Eigen::MatrixXd joint_inputs(const Eigen::Ref<const Eigen::MatrixXd>& x,
                             std::span<const Eigen::Index> subset, const CornerSpec& corner);

/// Feature matrix over all D + p columns (process parameters then corner
/// encoding), used for feature selection.
Eigen::MatrixXd full_feature_matrix(const Dataset& data, const std::vector<CornerSpec>& corners);

/// Writes the dataset as delimited text with header
/// x_1..x_D, corner_id, corner_enc_1..corner_enc_p, y.
void write_dataset_csv(std::ostream& out, const Dataset& data,
                       const std::vector<CornerSpec>& corners);

}  // namespace ymca
