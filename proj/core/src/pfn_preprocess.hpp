#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "pfn_network.hpp"

namespace ymca::detail {

/// Context statistics used to scale features and targets for the network.
struct ContextScaling {
  Eigen::VectorXd lo;
  Eigen::VectorXd range;  // 0 marks a constant column
  double y_mean = 0.0;
  double y_scale = 1.0;
};

inline ContextScaling fit_scaling(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                  const Eigen::Ref<const Eigen::VectorXd>& y) {
  ContextScaling s;
  s.lo = z.colwise().minCoeff().transpose();
  s.range = z.colwise().maxCoeff().transpose() - s.lo;
  for (Eigen::Index j = 0; j < s.range.size(); ++j) {
    if (!(s.range[j] > 1e-12)) s.range[j] = 0.0;
  }
  s.y_mean = y.mean();
  const double sd = std::sqrt((y.array() - s.y_mean).square().mean());
  // A constant context keeps a tiny positive scale so outputs collapse onto it.
  s.y_scale = std::max(sd, 1e-12 * (1.0 + std::abs(s.y_mean)));
  return s;
}

/// Rows of `z` min-max scaled to [-1, 1] by context statistics, right-padded
/// to max_features and followed by the presence mask.
template <typename T>
Mat<T> scaled_features(const ContextScaling& s, const Eigen::Ref<const Eigen::MatrixXd>& z,
                       int max_features) {
  const Eigen::Index d = z.cols();
  Mat<T> out = Mat<T>::Zero(z.rows(), 2 * max_features);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double r = s.range[j];
      out(i, j) = r > 0.0 ? static_cast<T>(2.0 * (z(i, j) - s.lo[j]) / r - 1.0) : T(0);
      out(i, max_features + j) = T(1);
    }
  }
  return out;
}

template <typename T>
ColVec<T> standardized_targets(const ContextScaling& s, const Eigen::Ref<const Eigen::VectorXd>& y) {
  return ((y.array() - s.y_mean) / s.y_scale).matrix().template cast<T>();
}

}  // namespace ymca::detail
