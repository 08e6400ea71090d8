#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ymca/error.hpp"
#include "ymca/gbdt.hpp"
#include "ymca/stats.hpp"

using namespace ymca;

namespace {

struct Split {
  int feature = -1;
  double gain = 0.0;
};

// Exhaustive best least-squares split over all distinct thresholds.
Split exhaustive_split(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int min_leaf) {
  Split best;
  const double n = static_cast<double>(y.size());
  const double total = y.sum();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x(a, j) < x(b, j); });
    double left = 0.0;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      left += y[order[i]];
      if (x(order[i], j) == x(order[i + 1], j)) continue;
      const double nl = static_cast<double>(i + 1), nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double gain = left * left / nl + (total - left) * (total - left) / nr - total * total / n;
      if (gain > best.gain) best = {static_cast<int>(j), gain};
    }
  }
  return best;
}

}  // namespace

TEST_CASE("a single stump matches the exhaustive best split") {
  Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd x(60, 4);
    std::uniform_int_distribution<int> level(0, 9);
    for (Eigen::Index i = 0; i < 60; ++i) {
      for (Eigen::Index j = 0; j < 4; ++j) x(i, j) = level(rng);
    }
    const Eigen::VectorXd y = x.col(trial % 4) * 0.5 + x.col((trial + 1) % 4) * 0.2 + standard_normal(rng, 60, 1);
    GbdtConfig c;
    c.trees = 1;
    c.max_leaves = 2;
    c.learning_rate = 1.0;
    c.min_leaf_samples = 5;
    const auto model = train_gbdt(x, y, c);
    const Split want = exhaustive_split(x, y, 5);
    REQUIRE(model.trees().size() == 1);
    CHECK(model.trees()[0][0].feature == want.feature);
    CHECK(model.importances()[want.feature] == doctest::Approx(want.gain).epsilon(1e-9));
    CHECK(model.importances().sum() == doctest::Approx(want.gain).epsilon(1e-9));
  }
}

TEST_CASE("importance concentrates on informative features") {
  Rng rng(2);
  const Eigen::MatrixXd x = standard_normal(rng, 500, 30);
  const Eigen::VectorXd y = 3.0 * x.col(4) - 2.0 * x.col(17) + 1.0 * x.col(23);
  const auto model = train_gbdt(x, y);
  const auto rank = rank_features(model);
  REQUIRE(rank.size() == 30);
  CHECK(rank[0] == 4);
  CHECK(rank[1] == 17);
  CHECK(rank[2] == 23);
  const Eigen::VectorXd pred = model.predict(x);
  const double r2 = 1.0 - (pred - y).squaredNorm() / (y.array() - y.mean()).square().sum();
  CHECK(r2 > 0.95);
}

TEST_CASE("constant target gives a single leaf and zero importance") {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(40, 3);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(40, 2.0);
  const auto model = train_gbdt(x, y);
  CHECK(model.importances().isZero());
  CHECK(model.base_score() == 2.0);
  const Eigen::VectorXd p = model.predict(x);
  CHECK((p.array() == 2.0).all());
}

TEST_CASE("ranking ties break by index") {
  Eigen::VectorXd imp(5);
  imp << 1.0, 3.0, 1.0, 0.0, 3.0;
  CHECK(rank_features(imp) == std::vector<Eigen::Index>{1, 4, 0, 2, 3});
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(train_gbdt(Eigen::MatrixXd::Zero(19, 2), Eigen::VectorXd::Zero(19)), InsufficientDataError);
  CHECK_THROWS_AS(train_gbdt(Eigen::MatrixXd::Zero(30, 2), Eigen::VectorXd::Zero(29)), ShapeError);
}

TEST_CASE("training is deterministic") {
  Rng rng(4);
  const Eigen::MatrixXd x = standard_normal(rng, 200, 10);
  const Eigen::VectorXd y = x.col(2).array().square() + x.col(5).array();
  const auto a = train_gbdt(x, y);
  const auto b = train_gbdt(x, y);
  CHECK(a.importances() == b.importances());
  CHECK(a.predict(x) == b.predict(x));
}
