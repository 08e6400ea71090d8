#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "ymca/bench.hpp"

namespace ymca::testing {

// Hand-built affine problem: corner k evaluates offsets[k] + weights[k]^T x
// with x of width D and the given support.
inline BenchmarkProblem affine_problem(Eigen::Index D, std::vector<Eigen::Index> support,
                                       const std::vector<Eigen::VectorXd>& weights,
                                       const std::vector<double>& offsets,
                                       const std::vector<double>& specs) {
  BenchmarkProblem p;
  p.family.dimension = D;
  p.family.support_size = static_cast<Eigen::Index>(support.size());
  p.support = std::move(support);
  std::vector<CornerSpec> corners;
  const std::vector<std::string> ids = {"TT", "FF", "SF", "FS", "SS"};
  for (std::size_t k = 0; k < weights.size(); ++k) {
    corners.push_back({ids[k % ids.size()] + (k >= ids.size() ? std::to_string(k) : ""),
                       1.0 + 0.05 * static_cast<double>(k), 25.0 * static_cast<double>(k), "TT", {}});
    CornerModel m;
    m.offset = offsets[k];
    m.weights = Eigen::VectorXd::Zero(D);
    for (std::size_t i = 0; i < p.support.size(); ++i) m.weights[p.support[i]] = weights[k][static_cast<Eigen::Index>(i)];
    const auto s = static_cast<Eigen::Index>(p.support.size());
    m.interaction = Eigen::MatrixXd::Zero(s, s);
    m.quadratic = Eigen::VectorXd::Zero(s);
    p.models.push_back(m);
  }
  encode_corners(corners);
  p.corners = corners;
  p.family.corners = corners;
  p.specs = specs;
  for (std::size_t k = 0; k < weights.size(); ++k) p.golden.push_back(golden_yield(p, k, GoldenMode::Analytic));
  return p;
}

inline double r_squared(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  const double m = truth.mean();
  return 1.0 - (pred - truth).squaredNorm() / (truth.array() - m).square().sum();
}

}  // namespace ymca::testing
