#pragma once

// Gaussian-process regression baseline with an RBF-ARD kernel whose
// hyperparameters are fitted by multi-restart gradient ascent on the log
// marginal likelihood.

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <vector>

#include "ymca/surrogate.hpp"

namespace ymca {

struct GpHyperparameters {
  Eigen::VectorXd lengthscales;  // one per input dimension
  double signal_variance = 1.0;
  double noise_variance = 1e-2;
};

struct GpOptions {
  int restarts = 5;
  int steps = 200;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  double noise_floor = 1e-6;  // standardized units
};

/// Log marginal likelihood log N(y | 0, K + noise I) of standardized data
/// and its gradient with respect to (log lengthscales, log signal variance,
/// log noise variance).
double gp_log_marginal_likelihood(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                  const Eigen::Ref<const Eigen::VectorXd>& y,
                                  const GpHyperparameters& h, Eigen::VectorXd* gradient = nullptr);

class GpPosterior;

/// Exact GP posterior under fitted hyperparameters. Inputs are z-scored and
/// targets standardized from the context.
std::unique_ptr<GpPosterior> gp_fit(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                    const Eigen::Ref<const Eigen::VectorXd>& y,
                                    const GpOptions& options = {});

class GpPosterior final : public Posterior {
 public:
  GpPosterior(const Eigen::Ref<const Eigen::MatrixXd>& z, const Eigen::Ref<const Eigen::VectorXd>& y,
              GpHyperparameters h, double log_marginal_likelihood);

  Eigen::Index dimension() const override { return z_.cols(); }
  void predict(const Eigen::Ref<const Eigen::MatrixXd>& queries, Eigen::VectorXd& mean,
               Eigen::VectorXd& stddev) const override;
  using Posterior::predict;

  /// Hyperparameters in standardized input/target units.
  const GpHyperparameters& hyperparameters() const { return h_; }
  double log_marginal_likelihood() const { return lml_; }

 private:
  Eigen::MatrixXd z_;  // standardized inputs
  Eigen::VectorXd z_mean_, z_scale_;
  double y_mean_ = 0.0, y_scale_ = 1.0;
  GpHyperparameters h_;
  double lml_ = 0.0;
  Eigen::MatrixXd chol_;  // lower Cholesky factor of K + noise I (+ jitter)
  Eigen::VectorXd alpha_;
};

/// Condition-then-predict convenience wrapper.
std::vector<Prediction> gp_fit_predict(const Eigen::Ref<const Eigen::MatrixXd>& context_z,
                                       const Eigen::Ref<const Eigen::VectorXd>& context_y,
                                       const Eigen::Ref<const Eigen::MatrixXd>& queries,
                                       const GpOptions& options = {});

class GpSurrogate final : public Surrogate {
 public:
  explicit GpSurrogate(GpOptions options = {}) : options_(options) {}

  std::string name() const override { return "gp"; }
  std::unique_ptr<Posterior> condition(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                       const Eigen::Ref<const Eigen::VectorXd>& y) const override;

 private:
  GpOptions options_;
};

}  // namespace ymca
