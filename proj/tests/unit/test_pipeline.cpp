#include "doctest.h"
#include "helpers.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "ymca/error.hpp"
#include "ymca/gp.hpp"
#include "ymca/pipeline.hpp"
#include "ymca/stats.hpp"

using namespace ymca;

namespace {

BenchmarkProblem affine(Eigen::Index D, Eigen::Index s, double rho, std::uint64_t seed) {
  SramLikeFamily f;
  f.dimension = D;
  f.support_size = s;
  f.coupling = rho;
  return generate_problem(f, seed);
}

RunConfig small_run(std::uint64_t seed) {
  RunConfig c;
  c.total_budget = 200;
  c.initial_per_corner = 10;
  c.mc_samples = 20'000;
  c.pool_size = 500;
  c.seed = seed;
  return c;
}

// Posterior with a fixed mean and spread everywhere.
class ConstantPosterior final : public Posterior {
 public:
  ConstantPosterior(Eigen::Index dim, double mu, double sd) : dim_(dim), mu_(mu), sd_(sd) {}
  Eigen::Index dimension() const override { return dim_; }
  void predict(const Eigen::Ref<const Eigen::MatrixXd>& q, Eigen::VectorXd& mean,
               Eigen::VectorXd& stddev) const override {
    mean = Eigen::VectorXd::Constant(q.rows(), mu_);
    stddev = Eigen::VectorXd::Constant(q.rows(), sd_);
  }

 private:
  Eigen::Index dim_;
  double mu_, sd_;
};

}  // namespace

TEST_CASE("initial design: counts, strata and determinism") {
  const auto p = affine(6, 3, 0.9, 1);
  RunConfig c = small_run(3);
  c.initial_per_corner = 50;
  c.total_budget = 1000;
  const Dataset a = initialize(p, c);
  const Dataset b = initialize(p, c);
  CHECK(a.size() == 250);
  for (std::size_t k = 0; k < 5; ++k) CHECK(a.rows_of(k).size() == 50);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  const auto rows = a.rows_of(2);
  for (Eigen::Index j = 0; j < 6; ++j) {
    std::set<int> strata;
    for (const auto r : rows) strata.insert(static_cast<int>(std::floor(normal_cdf(a.x(static_cast<Eigen::Index>(r), j)) * 50)));
    CHECK(strata.size() == 50);
  }
}

TEST_CASE("oracle yield matches the analytic value within four standard errors") {
  const auto p = affine(20, 4, 0.9, 7);
  const OracleSurrogate oracle(p);
  std::vector<Eigen::Index> all(20);
  for (Eigen::Index j = 0; j < 20; ++j) all[static_cast<std::size_t>(j)] = j;
  const auto post = oracle.condition(Eigen::MatrixXd(0, 24), Eigen::VectorXd(0));
  const std::size_t M = 1'000'000;
  for (std::size_t k = 0; k < p.corner_count(); ++k) {
    const double y = p.golden[k].value;
    const double est = estimate_yield(*post, all, p.corners[k], p.specs[k], M, YieldMode::MeanThreshold, 11 + k);
    CHECK(std::abs(est - y) <= 4.0 * std::sqrt(y * (1 - y) / M));
  }
}

TEST_CASE("yield estimate edge cases") {
  const auto corners = reference_corners();
  const std::vector<Eigen::Index> subset = {0, 1};
  const ConstantPosterior post(6, 2.0, 0.5);
  CHECK(estimate_yield(post, subset, corners[0], -1e300, 10'000, YieldMode::MeanThreshold, 1) == 1.0);
  CHECK(estimate_yield(post, subset, corners[0], 2.0, 10'000, YieldMode::Probabilistic, 1) == doctest::Approx(0.5));
}

TEST_CASE("epsilon of one converges after one active round with unit patience") {
  const auto p = affine(10, 3, 0.9, 2);
  const OracleSurrogate oracle(p);
  RunConfig c = small_run(1);
  c.epsilon = 1.0;
  c.patience = 1;
  auto r = run_pipeline(p, oracle, c);
  CHECK(r.converged);
  CHECK(r.rounds == 1);
  CHECK(r.trace.size() == 2);
  c.patience = 2;
  r = run_pipeline(p, oracle, c);
  CHECK(r.rounds == 2);
  CHECK(r.trace.size() == 3);
}

TEST_CASE("D=144 skips selection and uses every feature") {
  const auto p = affine(144, 6, 0.9, 7);
  const OracleSurrogate oracle(p);
  RunConfig c = small_run(4);
  c.epsilon = 1.0;
  const auto r = run_pipeline(p, oracle, c);
  CHECK_FALSE(r.selection.has_value());
  CHECK(r.subset.size() == 144);
  CHECK(std::isnan(r.importance_overlap));
}

TEST_CASE("wide problems run selection and project every surrogate input") {
  const auto p = affine(600, 3, 0.9, 11);
  // records the widths it is conditioned on
  class Recorder final : public Surrogate {
   public:
    explicit Recorder(const BenchmarkProblem& p) : inner_(p, {}) {}
    std::string name() const override { return "recorder"; }
    std::unique_ptr<Posterior> condition(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                         const Eigen::Ref<const Eigen::VectorXd>&) const override {
      widths.insert(z.cols());
      return std::make_unique<ConstantPosterior>(z.cols(), 0.0, 1.0);
    }
    mutable std::set<Eigen::Index> widths;
    OracleSurrogate inner_;
  } rec(p);
  RunConfig c = small_run(5);
  c.initial_per_corner = 100;
  c.total_budget = 520;
  c.epsilon = 1.0;
  const auto r = run_pipeline(p, rec, c);
  REQUIRE(r.selection.has_value());
  CHECK(rec.widths.size() == 1);
  CHECK(*rec.widths.begin() == static_cast<Eigen::Index>(r.subset.size()) + 4);
  for (const auto& b : r.batches) {
    for (const auto& pick : b.picks) CHECK(pick.x.size() == 600);
  }
  CHECK(r.importance_overlap >= 0.0);
  CHECK(r.importance_overlap <= 1.0);
}

TEST_CASE("budget accounting and trace invariants") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto p = affine(8, 3, 0.8, seed);
    const GpSurrogate gp(GpOptions{2, 40, 0.05, seed, 1e-6});
    RunConfig c = small_run(seed);
    c.total_budget = 95;
    c.epsilon = 1e-9;
    const auto r = run_pipeline(p, gp, c);
    CHECK_FALSE(r.converged);
    CHECK(r.simulations == 50 + r.rounds * 10);
    CHECK(r.simulations <= 95);
    CHECK(r.rounds == 4);
    CHECK(r.trace.size() == r.rounds + 1);
    for (const auto& t : r.trace) {
      for (const double y : t.estimates) {
        CHECK(y >= 0.0);
        CHECK(y <= 1.0);
      }
    }
    double mre = 0.0;
    for (const auto& corner : r.corners) mre += corner.error.percent;
    CHECK(r.mre == doctest::Approx(mre / 5.0));
    CHECK(r.speedup == doctest::Approx(250000.0 / static_cast<double>(r.simulations)));
  }
}

TEST_CASE("oracle run reproduces analytic yields regardless of sampling") {
  const auto p = affine(12, 4, 0.9, 3);
  const OracleSurrogate oracle(p);
  for (const auto s : {SamplingStrategy::Active, SamplingStrategy::Random}) {
    RunConfig c = small_run(8);
    c.sampling = s;
    c.mc_samples = 1'000'000;
    c.total_budget = 70;
    const auto r = run_pipeline(p, oracle, c);
    for (const auto& corner : r.corners) {
      const double y = corner.golden;
      CHECK(std::abs(corner.estimate - y) <= 4.0 * std::sqrt(y * (1 - y) / 1e6));
    }
  }
}

TEST_CASE("runs are deterministic") {
  const auto p = affine(6, 3, 0.9, 9);
  const GpSurrogate gp(GpOptions{2, 30, 0.05, 1, 1e-6});
  RunConfig c = small_run(2);
  c.total_budget = 80;
  const auto a = run_pipeline(p, gp, c);
  const auto b = run_pipeline(p, gp, c);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].estimates == b.trace[i].estimates);
}

TEST_CASE("context cap keeps the surrogate within capacity") {
  const auto p = affine(6, 3, 0.9, 1);
  class Capped final : public Surrogate {
   public:
    std::string name() const override { return "capped"; }
    std::size_t max_context() const override { return 60; }
    std::unique_ptr<Posterior> condition(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                         const Eigen::Ref<const Eigen::VectorXd>& y) const override {
      if (static_cast<std::size_t>(z.rows()) > 60) throw CapacityError("too many");
      largest = std::max(largest, z.rows());
      return std::make_unique<ConstantPosterior>(z.cols(), y.mean(), 1.0);
    }
    mutable Eigen::Index largest = 0;
  } capped;
  RunConfig c = small_run(1);
  c.initial_per_corner = 10;
  c.total_budget = 100;
  c.epsilon = 1e-12;
  const auto r = run_pipeline(p, capped, c);
  CHECK(capped.largest == 60);
  CHECK(r.trace.back().context_size == 60);
}

TEST_CASE("boundary concentration of active batches") {
  // median |f - spec| of points picked in rounds 1..5 vs random draws
  double active = 0.0, random = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = affine(6, 3, 0.9, 100 + seed);
    const GpSurrogate gp(GpOptions{2, 60, 0.05, seed, 1e-6});
    RunConfig c = small_run(seed);
    c.initial_per_corner = 10;
    c.total_budget = 100;
    c.epsilon = 1e-12;
    const auto r = run_pipeline(p, gp, c);
    std::vector<double> dist, base;
    Rng rng(seed);
    for (std::size_t b = 0; b < 5 && b < r.batches.size(); ++b) {
      for (const auto& pick : r.batches[b].picks) {
        dist.push_back(std::abs(p.evaluate(pick.x, pick.corner) - p.specs[pick.corner]));
        const Eigen::VectorXd x = standard_normal(rng, 6, 1);
        base.push_back(std::abs(p.evaluate(x, pick.corner) - p.specs[pick.corner]));
      }
    }
    active += median(dist) / 10.0;
    random += median(base) / 10.0;
  }
  CHECK(active < random);
}

TEST_CASE("configuration validation") {
  const auto p = affine(6, 3, 0.9, 1);
  RunConfig c = small_run(1);
  c.initial_per_corner = 100;
  CHECK_THROWS_AS(run_pipeline(p, OracleSurrogate(p), c), ConfigError);
  c = small_run(1);
  c.mc_samples = 100;
  CHECK_THROWS_AS(c.validate(5), ConfigError);
  c = small_run(1);
  c.epsilon = 0.0;
  CHECK_THROWS_AS(c.validate(5), ConfigError);
  CHECK_THROWS_AS(yield_mode_from_string("median"), ConfigError);
}

TEST_CASE("ablation grid shape and level-zero column") {
  const auto p = affine(5, 3, 0.9, 2);
  const GpSurrogate gp(GpOptions{1, 30, 0.05, 0, 1e-6});
  AblationConfig c;
  c.samples_per_corner = 15;
  c.seeds = 2;
  c.mc_samples = 20'000;
  const auto t = ablation_cross_corner(p, gp, c);
  REQUIRE(t.errors.size() == 5);
  REQUIRE(t.per_seed.size() == 2);
  for (const auto& row : t.errors) CHECK(row.size() == 5);
  // level 0 is target-only: rerunning a single-corner fit reproduces it
  const auto t2 = ablation_cross_corner(p, gp, c);
  for (std::size_t k = 0; k < 5; ++k) CHECK(t.errors[k][0] == t2.errors[k][0]);
}

TEST_CASE("identical corners: pooling never hurts") {
  auto p = affine(5, 3, 1.0, 4);
  for (auto& m : p.models) m.offset = p.models[0].offset;
  for (auto& s : p.specs) s = p.specs[0];
  for (std::size_t k = 0; k < p.corner_count(); ++k) p.golden[k] = golden_yield(p, k, GoldenMode::Analytic);
  const OracleSurrogate oracle(p);
  AblationConfig c;
  c.samples_per_corner = 10;
  c.seeds = 1;
  c.mc_samples = 20'000;
  const auto t = ablation_cross_corner(p, oracle, c);
  for (std::size_t k = 0; k < 5; ++k) CHECK(t.errors[k][4] <= t.errors[k][0]);
}
