#pragma once

// Least-squares gradient-boosted regression trees with histogram splits and
// leaf-wise growth. Used for feature-importance ranking only.

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace ymca {

struct GbdtConfig {
  int trees = 100;
  double learning_rate = 0.1;
  int max_leaves = 31;
  int min_leaf_samples = 20;
  int max_bins = 64;
};

class GbdtModel {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // go left when x <= threshold
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf output, learning rate already applied
  };
  using Tree = std::vector<Node>;

  GbdtModel() = default;
  GbdtModel(Eigen::Index features, double base, std::vector<Tree> trees, Eigen::VectorXd importances)
      : features_(features), base_(base), trees_(std::move(trees)), importances_(std::move(importances)) {}

  Eigen::Index feature_count() const { return features_; }
  double base_score() const { return base_; }
  const std::vector<Tree>& trees() const { return trees_; }
  /// Total split gain per feature; exactly zero for features never split on.
  const Eigen::VectorXd& importances() const { return importances_; }

  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const;

 private:
  Eigen::Index features_ = 0;
  double base_ = 0.0;
  std::vector<Tree> trees_;
  Eigen::VectorXd importances_;
};

/// Fits the ensemble to (x, y). Needs at least 20 rows. A constant target
/// yields a single-leaf model with all importances zero.
GbdtModel train_gbdt(const Eigen::Ref<const Eigen::MatrixXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& y, const GbdtConfig& config = {});

/// Feature indices (zero-based) by descending importance, ties by index.
std::vector<Eigen::Index> rank_features(const GbdtModel& model);
std::vector<Eigen::Index> rank_features(const Eigen::Ref<const Eigen::VectorXd>& importances);

}  // namespace ymca
