#include "doctest.h"

#include <cmath>

#include "ymca/error.hpp"
#include "ymca/prior.hpp"

using namespace ymca;

TEST_CASE("noise-free GP draw is single valued at duplicate inputs") {
  PriorConfig prior;
  prior.kind = PriorKind::Gp;
  prior.noise_std = 0.0;
  Eigen::MatrixXd x(6, 2);
  x << 0.1, 0.2, -1.0, 0.5, 0.3, 0.3, 0.1, 0.2, 1.2, -0.4, -1.0, 0.5;
  const Eigen::VectorXd y = sample_prior_values(prior, x, 3);
  CHECK(y[0] == y[3]);
  CHECK(y[1] == y[5]);
  CHECK(y[0] != y[1]);
}

TEST_CASE("tasks are bitwise reproducible from the seed") {
  const auto a = sample_prior_task(PriorConfig{}, 5, 20, 10, 123);
  const auto b = sample_prior_task(PriorConfig{}, 5, 20, 10, 123);
  CHECK(a.context_z == b.context_z);
  CHECK(a.context_y == b.context_y);
  CHECK(a.query_z == b.query_z);
  CHECK(a.query_y == b.query_y);
  const auto c = sample_prior_task(PriorConfig{}, 5, 20, 10, 124);
  CHECK(a.context_y != c.context_y);
}

TEST_CASE("task shapes") {
  const auto t = sample_prior_task(PriorConfig{}, 7, 13, 4, 1);
  CHECK(t.context_z.rows() == 13);
  CHECK(t.context_z.cols() == 7);
  CHECK(t.query_z.rows() == 4);
  CHECK(t.query_y.size() == 4);
  CHECK(t.noise_std >= 0.0);
  CHECK(t.noise_std <= 0.2);
  CHECK_THROWS_AS(sample_prior_task(PriorConfig{}, 0, 5, 5, 1), DomainError);
  CHECK_THROWS_AS(sample_prior_task(PriorConfig{}, 2, 0, 5, 1), DomainError);
}

TEST_CASE("pooled standardized targets are centered over 1e4 tasks") {
  double total = 0.0;
  double count = 0.0;
  int gp = 0;
  for (std::uint64_t s = 0; s < 10'000; ++s) {
    const auto t = sample_prior_task(PriorConfig{}, 1 + s % 4, 12, 4, s);
    Eigen::VectorXd y(16);
    y << t.context_y, t.query_y;
    const double m = y.mean();
    const double sd = std::sqrt((y.array() - m).square().mean());
    if (sd > 0.0) {
      total += ((y.array() - m) / sd).sum();
      count += 16.0;
    }
    gp += t.kind == PriorKind::Gp;
  }
  CHECK(std::abs(total / count) < 0.02);
  // half the mixture comes from each family
  CHECK(std::abs(gp / 1e4 - 0.5) < 0.03);
}

TEST_CASE("prior inputs are standardized") {
  const Eigen::MatrixXd x = sample_prior_inputs(20'000, 8, 9);
  for (Eigen::Index j = 0; j < 8; ++j) {
    const double m = x.col(j).mean();
    const double v = (x.col(j).array() - m).square().mean();
    CHECK(std::abs(m) < 0.05);
    CHECK(v == doctest::Approx(1.0).epsilon(0.1));
  }
}
