#pragma once

// Synthetic regression tasks drawn from the meta-prior the in-context
// surrogate is trained on.

#include <Eigen/Core>

#include <cstdint>
#include <optional>

namespace ymca {

enum class PriorKind { Gp, Mlp, Mixture };

struct PriorConfig {
  PriorKind kind = PriorKind::Mixture;
  double gp_fraction = 0.5;  // share of GP tasks under Mixture
  double lengthscale_min = 0.1;
  double lengthscale_max = 2.0;
  double noise_max = 0.2;
  /// Forces the observation noise std instead of drawing it.
  std::optional<double> noise_std;
};

struct TaskSample {
  Eigen::MatrixXd context_z;
  Eigen::VectorXd context_y;
  Eigen::MatrixXd query_z;
  Eigen::VectorXd query_y;
  PriorKind kind = PriorKind::Gp;
  double noise_std = 0.0;
};

/// Draws one latent function from the prior and returns its standardized
/// values (plus observation noise) at the given input rows. Identical rows
/// receive identical latent values.
Eigen::VectorXd sample_prior_values(const PriorConfig& prior,
                                    const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                    std::uint64_t seed, PriorKind* drawn_kind = nullptr,
                                    double* drawn_noise = nullptr);

/// Draws input columns (uniform box, Gaussian or few-level discrete, all
/// standardized) for n rows.
Eigen::MatrixXd sample_prior_inputs(Eigen::Index n, Eigen::Index dim, std::uint64_t seed);

/// One task: n_ctx context pairs and n_query held-out pairs from a single
/// latent function. Fully determined by the seed.
TaskSample sample_prior_task(const PriorConfig& prior, Eigen::Index dim, Eigen::Index n_ctx,
                             Eigen::Index n_query, std::uint64_t seed);

}  // namespace ymca
