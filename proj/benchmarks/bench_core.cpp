// Micro-benchmarks of the hot paths: PFN inference, GBDT training, GP
// fitting and surrogate Monte Carlo yield.

#include <benchmark/benchmark.h>

#include "ymca/bench.hpp"
#include "ymca/gbdt.hpp"
#include "ymca/gp.hpp"
#include "ymca/pfn.hpp"
#include "ymca/pipeline.hpp"
#include "ymca/stats.hpp"

namespace {

using namespace ymca;

void pfn_predict(benchmark::State& state) {
  const auto ctx = state.range(0);
  const PfnModel model = PfnModel::initialize(PfnConfig{}, 1);
  Rng rng(2);
  const Eigen::MatrixXd z = standard_normal(rng, ctx + 64, 20);
  const Eigen::VectorXd y = z.rowwise().sum();
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict(model, z.topRows(ctx), y.head(ctx), z.bottomRows(64)));
  }
}
BENCHMARK(pfn_predict)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void gbdt_train(benchmark::State& state) {
  Rng rng(3);
  const Eigen::MatrixXd x = standard_normal(rng, 1000, state.range(0));
  const Eigen::VectorXd y = x.leftCols(5).rowwise().sum();
  for (auto _ : state) benchmark::DoNotOptimize(train_gbdt(x, y));
}
BENCHMARK(gbdt_train)->Arg(100)->Arg(1156)->Unit(benchmark::kMillisecond);

void gp_fit_hyper(benchmark::State& state) {
  Rng rng(4);
  const Eigen::MatrixXd z = standard_normal(rng, state.range(0), 12);
  const Eigen::VectorXd y = z.col(0) + 0.5 * z.col(1).cwiseAbs2();
  GpOptions o;
  o.restarts = 1;
  o.steps = 50;
  for (auto _ : state) benchmark::DoNotOptimize(gp_fit(z, y, o));
}
BENCHMARK(gp_fit_hyper)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void surrogate_yield(benchmark::State& state) {
  SramLikeFamily f;
  f.dimension = 16;
  f.support_size = 4;
  const BenchmarkProblem p = generate_problem(f, 5);
  RunConfig c;
  c.initial_per_corner = 40;
  const Dataset d = initialize(p, c);
  std::vector<Eigen::Index> subset(16);
  for (Eigen::Index j = 0; j < 16; ++j) subset[static_cast<std::size_t>(j)] = j;
  const auto posterior = OracleSurrogate(p).condition(joint_inputs(d, subset, p.corners), d.y);
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_yield(*posterior, subset, p.corners[0], p.specs[0],
                                            static_cast<std::size_t>(state.range(0)), YieldMode::MeanThreshold, 6));
  }
}
BENCHMARK(surrogate_yield)->Arg(100'000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
