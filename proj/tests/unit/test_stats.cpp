#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "ymca/format.hpp"
#include "ymca/stats.hpp"

using namespace ymca;

TEST_CASE("normal cdf reference values") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.6448536269514722) == doctest::Approx(0.95).epsilon(1e-14));
  CHECK(normal_cdf(-6.0) == doctest::Approx(9.865876450376946e-10).epsilon(1e-12));
  CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327));
}

TEST_CASE("quantile inverts the cdf") {
  for (double p = 1e-9; p < 1.0; p = p < 0.5 ? p * 3.0 : p + (1.0 - p) * 0.5) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
    if (1.0 - p < 1e-9) break;
  }
}

TEST_CASE("latin hypercube places one point per stratum") {
  Rng rng(4);
  const Eigen::MatrixXd u = latin_hypercube(rng, 50, 7);
  for (Eigen::Index j = 0; j < 7; ++j) {
    std::set<int> strata;
    for (Eigen::Index i = 0; i < 50; ++i) {
      CHECK(u(i, j) > 0.0);
      CHECK(u(i, j) < 1.0);
      strata.insert(static_cast<int>(std::floor(u(i, j) * 50)));
    }
    CHECK(strata.size() == 50);
  }
}

TEST_CASE("derived seeds are distinct across streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 100; ++s) seen.insert(derive_seed(42, s));
  CHECK(seen.size() == 100);
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
}

TEST_CASE("median of odd and even lengths") {
  const std::vector<double> odd = {3, 1, 2};
  const std::vector<double> even = {4, 1, 3, 2};
  CHECK(median(odd) == 2.0);
  CHECK(median(even) == 2.5);
  CHECK(mean(even) == 2.5);
}

TEST_CASE("shortest round-trip formatting") {
  for (const double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.0, -2.5}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_fixed(0.2296, 2) == "0.23");
}
