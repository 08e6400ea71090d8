#pragma once

// End-to-end multi-corner yield analysis: initial design, optional feature
// selection, in-context surrogate, yield estimation, active sampling and
// convergence, plus the cross-corner pooling ablation.

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ymca/active.hpp"
#include "ymca/bench.hpp"
#include "ymca/dataset.hpp"
#include "ymca/featsel.hpp"
#include "ymca/metrics.hpp"
#include "ymca/surrogate.hpp"

namespace ymca {

enum class YieldMode { MeanThreshold, Probabilistic };
enum class SamplingStrategy { Active, Random };

std::string to_string(YieldMode mode);
YieldMode yield_mode_from_string(const std::string& s);
std::string to_string(SamplingStrategy strategy);
SamplingStrategy sampling_from_string(const std::string& s);

struct RunConfig {
  std::size_t total_budget = 1000;
  std::size_t initial_per_corner = 50;
  std::size_t batch_size = 10;
  double epsilon = 1e-3;
  /// Consecutive checks below epsilon required to stop.
  std::size_t patience = 2;
  std::size_t mc_samples = 1'000'000;
  YieldMode yield_mode = YieldMode::MeanThreshold;
  SamplingStrategy sampling = SamplingStrategy::Active;
  std::size_t pool_size = 10'000;
  /// Feature selection runs when D + p exceeds this (or the surrogate's
  /// feature capacity, whichever is smaller).
  std::size_t selection_threshold = 500;
  /// Per-corner sample count of the brute-force reference used for speedup.
  std::int64_t reference_samples_per_corner = 50'000;
  std::uint64_t seed = 0;

  /// Throws ConfigError when budgets or thresholds are inconsistent.
  void validate(std::size_t corners) const;
};

/// Latin-hypercube design of `initial_per_corner` points per corner mapped
/// through the Gaussian inverse CDF, simulated at their corner.
Dataset initialize(const BenchmarkProblem& problem, const RunConfig& config);

/// Surrogate Monte Carlo yield at one corner over `samples` fresh draws of
/// the subset coordinates, chunked to bound memory.
double estimate_yield(const Posterior& posterior, std::span<const Eigen::Index> subset,
                      const CornerSpec& corner, double spec, std::size_t samples, YieldMode mode,
                      std::uint64_t seed);

/// Surrogate that returns the benchmark's true performance with a vanishing
/// standard deviation. Inputs must be [x_subset, corner encoding] with the
/// subset covering the problem's support.
class OracleSurrogate final : public Surrogate {
 public:
  explicit OracleSurrogate(const BenchmarkProblem& problem, std::vector<Eigen::Index> subset = {});

  std::string name() const override { return "oracle"; }
  std::unique_ptr<Posterior> condition(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                       const Eigen::Ref<const Eigen::VectorXd>& y) const override;

 private:
  const BenchmarkProblem* problem_;
  std::vector<Eigen::Index> subset_;
};

struct CornerResult {
  std::string id;
  double estimate = 0.0;
  double golden = 0.0;
  RelativeError error;
};

struct RoundRecord {
  std::size_t round = 0;
  std::vector<double> estimates;  // one per corner
  double max_change = 0.0;        // NaN for the first entry
  std::size_t simulations = 0;    // cumulative
  std::size_t context_size = 0;
};

struct YieldReport {
  std::vector<CornerResult> corners;
  double mre = 0.0;
  std::size_t simulations = 0;
  std::int64_t reference_samples = 0;
  double speedup = 0.0;
  bool converged = false;
  std::size_t rounds = 0;  // active rounds after initialization
  std::vector<RoundRecord> trace;  // rounds + 1 entries
  std::vector<Eigen::Index> subset;  // zero-based process indices fed to the surrogate
  std::optional<FeatureSelection> selection;
  /// Overlap of the initial subset with a ranking refitted on the final
  /// dataset (fraction of S found in the refitted top |S|); NaN when no
  /// selection ran.
  double importance_overlap = 0.0;
  std::vector<BatchSelection> batches;
  std::string surrogate;
};

/// Progress hook invoked after every yield estimate.
using RoundCallback = std::function<void(const RoundRecord&)>;

/// Runs the full loop. Budget exhaustion without convergence is reported
/// through `converged = false`, not an error.
YieldReport run_pipeline(const BenchmarkProblem& problem, const Surrogate& surrogate,
                         const RunConfig& config, const RoundCallback& on_round = {});

struct AblationConfig {
  std::size_t samples_per_corner = 50;
  std::size_t seeds = 10;
  std::size_t mc_samples = 100'000;
  YieldMode yield_mode = YieldMode::MeanThreshold;
  std::uint64_t seed = 0;
};

struct AblationTable {
  std::vector<std::string> corners;
  /// errors[target][level] mean relative error (percent) over seeds, where
  /// level counts pooled non-target corners.
  std::vector<std::vector<double>> errors;
  /// per_seed[seed][target][level]
  std::vector<std::vector<std::vector<double>>> per_seed;
};

/// For each seed and target corner: draws samples at every corner, then for
/// pooling level L conditions the surrogate on the target samples plus those
/// of the first L corners of a seeded ordering of the others, and records
/// the target's yield relative error.
AblationTable ablation_cross_corner(const BenchmarkProblem& problem, const Surrogate& surrogate,
                                    const AblationConfig& config);

}  // namespace ymca
