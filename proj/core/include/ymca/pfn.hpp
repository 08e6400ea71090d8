#pragma once

// Prior-fitted network: a transformer meta-trained on synthetic regression
// tasks that maps (context set, query) to a Gaussian predictive in a single
// forward pass. Weights are frozen once training returns.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "ymca/prior.hpp"
#include "ymca/surrogate.hpp"

namespace ymca {

struct PfnConfig {
  int d_model = 128;
  int n_heads = 4;
  int n_layers = 4;
  int d_ff = 256;
  int max_features = 60;
  int max_context = 1000;

  void validate() const;
  bool operator==(const PfnConfig&) const = default;
};

struct PfnProvenance {
  std::uint64_t seed = 0;
  std::uint64_t task_count = 0;
  std::uint64_t steps = 0;
  double final_nll = std::numeric_limits<double>::quiet_NaN();
  std::string config_hash;  // of the configuration that produced the weights
};

class PfnModel {
 public:
  /// Randomly initialized weights.
  static PfnModel initialize(const PfnConfig& config, std::uint64_t seed);

  PfnModel(const PfnConfig& config, std::vector<float> weights, PfnProvenance provenance);

  const PfnConfig& config() const { return config_; }
  const std::vector<float>& weights() const { return weights_; }
  const PfnProvenance& provenance() const { return provenance_; }
  std::size_t parameter_count() const { return weights_.size(); }

  /// Versioned binary checkpoint: magic, version, JSON header with
  /// architecture and provenance, then little-endian float32 weights.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static PfnModel load(std::istream& in);
  static PfnModel load(const std::filesystem::path& path);

 private:
  PfnConfig config_;
  std::vector<float> weights_;
  PfnProvenance provenance_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// In-context predictions for `queries` given a context set. Targets are
/// z-scored over the context on entry and mapped back on exit; features are
/// min-max scaled from context statistics.
std::vector<Prediction> predict(const PfnModel& model,
                                const Eigen::Ref<const Eigen::MatrixXd>& context_z,
                                const Eigen::Ref<const Eigen::VectorXd>& context_y,
                                const Eigen::Ref<const Eigen::MatrixXd>& queries);

struct AttentionReport {
  Eigen::VectorXd weights;  // one per context point, sums to 1
  double effective_sample_size = 0.0;  // Kish: 1 / sum(w^2)
};

/// Head-averaged final-layer attention of one query over the context.
AttentionReport attention_weights(const PfnModel& model,
                                  const Eigen::Ref<const Eigen::MatrixXd>& context_z,
                                  const Eigen::Ref<const Eigen::VectorXd>& context_y,
                                  const Eigen::Ref<const Eigen::VectorXd>& query);

/// Kish effective sample size of normalized weights.
double kish_effective_size(const Eigen::Ref<const Eigen::VectorXd>& weights);

class PfnSurrogate final : public Surrogate {
 public:
  explicit PfnSurrogate(std::shared_ptr<const PfnModel> model);

  std::string name() const override { return "pfn"; }
  std::size_t max_context() const override;
  std::size_t max_features() const override;
  std::unique_ptr<Posterior> condition(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                       const Eigen::Ref<const Eigen::VectorXd>& y) const override;

  const PfnModel& model() const { return *model_; }

 private:
  std::shared_ptr<const PfnModel> model_;
};

// ---- meta-training ---------------------------------------------------------

struct MetaTrainConfig {
  PfnConfig model;
  PriorConfig prior;
  std::uint64_t seed = 0;
  std::size_t steps = 5500;
  std::size_t batch_size = 16;
  double learning_rate = 3e-4;
  std::size_t warmup_steps = 200;
  double grad_clip = 1.0;
  /// Task input widths: uniform on [min_dim, max_dim], except that with
  /// probability wide_fraction the width is uniform on (max_dim, max_features].
  int min_dim = 1;
  int max_dim = 16;
  double wide_fraction = 0.1;
  int min_context = 8;
  int max_context = 200;
  int queries = 64;
  std::size_t validation_tasks = 64;
  std::size_t validation_every = 500;

  std::size_t task_count() const { return steps * batch_size; }
  void validate() const;
};

struct TrainLogRow {
  std::size_t step = 0;
  double train_nll = 0.0;
  double validation_nll = std::numeric_limits<double>::quiet_NaN();
};

struct MetaTrainResult {
  PfnModel model;
  std::vector<TrainLogRow> log;
};

/// Minimizes the expected query NLL over tasks drawn from the prior with
/// Adam. Throws TrainingError if the loss becomes non-finite.
MetaTrainResult meta_train(const MetaTrainConfig& config,
                           const std::function<void(const TrainLogRow&)>& on_log = {});

/// Writes the training log as delimited text: step,train_nll,validation_nll.
void write_training_log(std::ostream& out, const std::vector<TrainLogRow>& log);

/// Mean Gaussian NLL of the model's predictive over the query points of the
/// tasks, in the tasks' own target units.
double mean_task_nll(const PfnModel& model, const std::vector<TaskSample>& tasks);

/// Same metric for a single Gaussian fitted to each task's context targets.
double context_gaussian_nll(const std::vector<TaskSample>& tasks);

double gaussian_nll(double y, double mean, double stddev);

}  // namespace ymca
