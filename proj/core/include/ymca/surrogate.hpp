#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace ymca {

/// Predictive mean and (strictly positive) standard deviation at one query.
struct Prediction {
  double mean = 0.0;
  double stddev = 1.0;
};

/// A surrogate already conditioned on a context set. Immutable; safe to
/// query concurrently.
class Posterior {
 public:
  virtual ~Posterior() = default;

  /// Input width the posterior was conditioned on.
  virtual Eigen::Index dimension() const = 0;

  /// Writes mean and stddev for every row of `queries`.
  virtual void predict(const Eigen::Ref<const Eigen::MatrixXd>& queries, Eigen::VectorXd& mean,
                       Eigen::VectorXd& stddev) const = 0;

  std::vector<Prediction> predict(const Eigen::Ref<const Eigen::MatrixXd>& queries) const;
};

/// Common surrogate interface: condition on (z, y) pairs, then predict.
class Surrogate {
 public:
  virtual ~Surrogate() = default;

  virtual std::string name() const = 0;
  virtual std::size_t max_context() const { return std::numeric_limits<std::size_t>::max(); }
  virtual std::size_t max_features() const { return std::numeric_limits<std::size_t>::max(); }

  /// Throws CapacityError when the context exceeds max_context() or the
  /// input width exceeds max_features().
  virtual std::unique_ptr<Posterior> condition(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                               const Eigen::Ref<const Eigen::VectorXd>& y) const = 0;
};

/// Condition-then-predict convenience wrapper.
std::vector<Prediction> predict(const Surrogate& surrogate,
                                const Eigen::Ref<const Eigen::MatrixXd>& context_z,
                                const Eigen::Ref<const Eigen::VectorXd>& context_y,
                                const Eigen::Ref<const Eigen::MatrixXd>& queries);

}  // namespace ymca
