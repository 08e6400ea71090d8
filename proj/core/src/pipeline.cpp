#include "ymca/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ymca/error.hpp"
#include "ymca/gbdt.hpp"
#include "ymca/stats.hpp"

namespace ymca {
namespace {

constexpr Eigen::Index kYieldChunk = 8192;
constexpr double kOracleStddev = 1e-9;

// Seed streams, kept apart so that changing one consumer leaves the others.
constexpr std::uint64_t kStreamInit = 100;
constexpr std::uint64_t kStreamSelection = 2;
constexpr std::uint64_t kStreamYield = 200;
constexpr std::uint64_t kStreamBatch = 3000;
constexpr std::uint64_t kStreamCap = 7000;

class OraclePosterior final : public Posterior {
 public:
  OraclePosterior(const BenchmarkProblem& problem, std::vector<Eigen::Index> subset)
      : problem_(problem), subset_(std::move(subset)) {
    for (Eigen::Index s : problem_.support) {
      const auto it = std::find(subset_.begin(), subset_.end(), s);
      position_.push_back(it == subset_.end() ? -1 : static_cast<Eigen::Index>(it - subset_.begin()));
    }
  }

  Eigen::Index dimension() const override {
    return static_cast<Eigen::Index>(subset_.size()) + problem_.encoding_size();
  }

  void predict(const Eigen::Ref<const Eigen::MatrixXd>& queries, Eigen::VectorXd& mean,
               Eigen::VectorXd& stddev) const override {
    if (queries.rows() > 0 && queries.cols() != dimension()) {
      throw ShapeError("oracle query width does not match subset plus encoding");
    }
    const Eigen::Index p = problem_.encoding_size();
    mean.resize(queries.rows());
    stddev = Eigen::VectorXd::Constant(queries.rows(), kOracleStddev);
    Eigen::VectorXd xs(static_cast<Eigen::Index>(position_.size()));
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
      const std::size_t k = nearest_corner(queries.row(i).tail(p));
      for (std::size_t j = 0; j < position_.size(); ++j) {
        xs[static_cast<Eigen::Index>(j)] = position_[j] < 0 ? 0.0 : queries(i, position_[j]);
      }
      mean[i] = problem_.evaluate_support(xs, k);
    }
  }

 private:
  std::size_t nearest_corner(const Eigen::Ref<const Eigen::RowVectorXd>& enc) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < problem_.corners.size(); ++k) {
      const double d = (problem_.corners[k].encoding.transpose() - enc).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  }

  const BenchmarkProblem& problem_;
  std::vector<Eigen::Index> subset_;
  std::vector<Eigen::Index> position_;  // support index -> column in the subset, or -1
};

std::vector<Eigen::Index> all_indices(Eigen::Index d) {
  std::vector<Eigen::Index> v(static_cast<std::size_t>(d));
  std::iota(v.begin(), v.end(), Eigen::Index{0});
  return v;
}

/// Rows kept when the dataset exceeds the surrogate's context capacity:
/// every point the previous posterior places within 3 sigma of its corner
/// boundary, topped up with a uniform subsample of the rest.
std::vector<std::size_t> capped_rows(const Dataset& data, const Posterior* previous,
                                     std::span<const Eigen::Index> subset,
                                     const std::vector<CornerSpec>& corners,
                                     const std::vector<double>& specs, std::size_t cap, Rng& rng) {
  std::vector<std::size_t> near, far;
  if (previous) {
    const Eigen::MatrixXd z = joint_inputs(data, subset, corners);
    Eigen::VectorXd mu, sd;
    previous->predict(z, mu, sd);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      (std::abs(mu[r] - specs[data.corner[i]]) < 3.0 * sd[r] ? near : far).push_back(i);
    }
  } else {
    far.resize(data.size());
    std::iota(far.begin(), far.end(), std::size_t{0});
  }
  std::vector<std::size_t> keep;
  if (near.size() >= cap) {
    std::shuffle(near.begin(), near.end(), rng);
    keep.assign(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(cap));
  } else {
    keep = near;
    std::shuffle(far.begin(), far.end(), rng);
    keep.insert(keep.end(), far.begin(), far.begin() + static_cast<std::ptrdiff_t>(cap - near.size()));
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

}  // namespace

std::string to_string(YieldMode mode) {
  return mode == YieldMode::MeanThreshold ? "mean-threshold" : "probabilistic";
}

YieldMode yield_mode_from_string(const std::string& s) {
  if (s == "mean-threshold") return YieldMode::MeanThreshold;
  if (s == "probabilistic") return YieldMode::Probabilistic;
  throw ConfigError("unknown yield mode '" + s + "' (expected mean-threshold or probabilistic)");
}

std::string to_string(SamplingStrategy strategy) {
  return strategy == SamplingStrategy::Active ? "active" : "random";
}

SamplingStrategy sampling_from_string(const std::string& s) {
  if (s == "active") return SamplingStrategy::Active;
  if (s == "random") return SamplingStrategy::Random;
  throw ConfigError("unknown sampling strategy '" + s + "' (expected active or random)");
}

void RunConfig::validate(std::size_t corners) const {
  if (corners == 0) throw ConfigError("problem has no corners");
  if (initial_per_corner < 1) throw ConfigError("initial_per_corner must be positive");
  if (initial_per_corner * corners > total_budget) {
    throw ConfigError("initial design (initial_per_corner x corners) exceeds the total budget");
  }
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (mc_samples < 10'000) throw ConfigError("mc_samples must be at least 10000");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (pool_size < batch_size) throw ConfigError("pool_size must be at least batch_size");
  if (reference_samples_per_corner < 1) throw ConfigError("reference_samples_per_corner must be positive");
}

Dataset initialize(const BenchmarkProblem& problem, const RunConfig& config) {
  config.validate(problem.corner_count());
  Dataset data;
  data.x.resize(0, problem.dimension());
  const auto n = static_cast<Eigen::Index>(config.initial_per_corner);
  for (std::size_t k = 0; k < problem.corner_count(); ++k) {
    Rng rng(derive_seed(config.seed, kStreamInit + k));
    const Eigen::MatrixXd x = gaussian_latin_hypercube(rng, n, problem.dimension());
    const Eigen::VectorXd y = problem.evaluate_rows(x, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isfinite(y[i])) {
        throw NumericalError("simulation at corner " + problem.corners[k].id + ", initial point " +
                             std::to_string(i) + " returned a non-finite value");
      }
    }
    const std::vector<std::size_t> ks(static_cast<std::size_t>(n), k);
    data.append(x, ks, y);
  }
  return data;
}

double estimate_yield(const Posterior& posterior, std::span<const Eigen::Index> subset,
                      const CornerSpec& corner, double spec, std::size_t samples, YieldMode mode,
                      std::uint64_t seed) {
  if (samples == 0) throw ConfigError("yield estimate needs at least one sample");
  const auto s = static_cast<Eigen::Index>(subset.size());
  const Eigen::Index p = corner.encoding.size();
  Rng rng(seed);
  double total = 0.0;
  Eigen::VectorXd mu, sd;
  for (std::size_t done = 0; done < samples;) {
    const Eigen::Index rows = std::min<Eigen::Index>(kYieldChunk, static_cast<Eigen::Index>(samples - done));
    Eigen::MatrixXd z(rows, s + p);
    z.leftCols(s) = standard_normal(rng, rows, s);
    z.rightCols(p).rowwise() = corner.encoding.transpose();
    posterior.predict(z, mu, sd);
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (mode == YieldMode::MeanThreshold) {
        total += mu[i] > spec ? 1.0 : 0.0;
      } else {
        total += normal_cdf((mu[i] - spec) / sd[i]);
      }
    }
    done += static_cast<std::size_t>(rows);
  }
  return std::clamp(total / static_cast<double>(samples), 0.0, 1.0);
}

OracleSurrogate::OracleSurrogate(const BenchmarkProblem& problem, std::vector<Eigen::Index> subset)
    : problem_(&problem), subset_(std::move(subset)) {
  if (subset_.empty()) subset_ = all_indices(problem.dimension());
}

std::unique_ptr<Posterior> OracleSurrogate::condition(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                                      const Eigen::Ref<const Eigen::VectorXd>& y) const {
  auto post = std::make_unique<OraclePosterior>(*problem_, subset_);
  if (z.rows() != y.size()) throw ShapeError("context inputs and targets differ in length");
  if (z.rows() > 0 && z.cols() != post->dimension()) {
    throw ShapeError("oracle context width does not match subset plus encoding");
  }
  return post;
}

YieldReport run_pipeline(const BenchmarkProblem& problem, const Surrogate& surrogate,
                         const RunConfig& config, const RoundCallback& on_round) {
  config.validate(problem.corner_count());
  const std::size_t K = problem.corner_count();
  const Eigen::Index D = problem.dimension();
  const Eigen::Index p = problem.encoding_size();

  YieldReport report;
  report.surrogate = surrogate.name();
  report.importance_overlap = std::numeric_limits<double>::quiet_NaN();
  Dataset data = initialize(problem, config);

  const std::size_t gate = std::min(config.selection_threshold, surrogate.max_features());
  if (static_cast<std::size_t>(D + p) > gate) {
    SelectionLimits limits;
    limits.max_width = surrogate.max_features();
    report.selection = select_features(data, problem.corners, derive_seed(config.seed, kStreamSelection), limits);
    report.subset = report.selection->subset();
  } else {
    report.subset = all_indices(D);
  }
  const std::vector<Eigen::Index>& subset = report.subset;

  std::unique_ptr<Posterior> posterior;
  Rng cap_rng(derive_seed(config.seed, kStreamCap));
  auto condition = [&] {
    std::unique_ptr<Posterior> next;
    std::size_t used = data.size();
    if (data.size() > surrogate.max_context()) {
      const auto rows = capped_rows(data, posterior.get(), subset, problem.corners, problem.specs,
                                    surrogate.max_context(), cap_rng);
      const Dataset ctx = data.subset(rows);
      next = surrogate.condition(joint_inputs(ctx, subset, problem.corners), ctx.y);
      used = rows.size();
    } else {
      next = surrogate.condition(joint_inputs(data, subset, problem.corners), data.y);
    }
    posterior = std::move(next);
    return used;
  };
  auto estimate_all = [&] {
    std::vector<double> est(K);
    for (std::size_t k = 0; k < K; ++k) {
      est[k] = estimate_yield(*posterior, subset, problem.corners[k], problem.specs[k], config.mc_samples,
                              config.yield_mode, derive_seed(config.seed, kStreamYield + k));
    }
    return est;
  };

  std::size_t streak = 0;
  std::size_t round = 0;
  for (;;) {
    RoundRecord rec;
    rec.round = round;
    rec.context_size = condition();
    rec.estimates = estimate_all();
    rec.simulations = data.size();
    rec.max_change = std::numeric_limits<double>::quiet_NaN();
    if (!report.trace.empty()) {
      double change = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        change = std::max(change, std::abs(rec.estimates[k] - report.trace.back().estimates[k]));
      }
      rec.max_change = change;
      streak = change < config.epsilon ? streak + 1 : 0;
    }
    report.trace.push_back(rec);
    if (on_round) on_round(rec);
    if (streak >= config.patience) {
      report.converged = true;
      break;
    }
    if (data.size() + config.batch_size > config.total_budget) break;

    ++round;
    Eigen::MatrixXd xb(static_cast<Eigen::Index>(config.batch_size), D);
    std::vector<std::size_t> kb(config.batch_size);
    if (config.sampling == SamplingStrategy::Active) {
      AcquisitionConfig acq;
      acq.pool_size = config.pool_size;
      acq.batch_size = config.batch_size;
      BatchSelection sel = select_batch(*posterior, D, subset, problem.corners, problem.specs, acq,
                                        derive_seed(config.seed, kStreamBatch + round));
      for (std::size_t b = 0; b < sel.picks.size(); ++b) {
        xb.row(static_cast<Eigen::Index>(b)) = sel.picks[b].x.transpose();
        kb[b] = sel.picks[b].corner;
      }
      report.batches.push_back(std::move(sel));
    } else {
      Rng rng(derive_seed(config.seed, kStreamBatch + round));
      xb = standard_normal(rng, static_cast<Eigen::Index>(config.batch_size), D);
      std::uniform_int_distribution<std::size_t> pick(0, K - 1);
      for (auto& k : kb) k = pick(rng);
    }
    Eigen::VectorXd yb(static_cast<Eigen::Index>(config.batch_size));
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const auto r = static_cast<Eigen::Index>(b);
      yb[r] = problem.evaluate(xb.row(r).transpose(), kb[b]);
      if (!std::isfinite(yb[r])) {
        throw NumericalError("simulation at corner " + problem.corners[kb[b]].id + " in round " +
                             std::to_string(round) + " returned a non-finite value");
      }
    }
    data.append(xb, kb, yb);
  }

  report.rounds = round;
  report.simulations = data.size();
  report.reference_samples = config.reference_samples_per_corner * static_cast<std::int64_t>(K);
  report.speedup = speedup(static_cast<double>(report.reference_samples), static_cast<double>(report.simulations));
  std::vector<RelativeError> errors;
  for (std::size_t k = 0; k < K; ++k) {
    CornerResult c;
    c.id = problem.corners[k].id;
    c.estimate = report.trace.back().estimates[k];
    c.golden = problem.golden[k].value;
    c.error = relative_error(c.estimate, c.golden);
    errors.push_back(c.error);
    report.corners.push_back(c);
  }
  report.mre = mean_relative_error(errors);

  if (report.selection) {
    // Diagnostic only: the subset is never revised.
    const GbdtModel refit = train_gbdt(full_feature_matrix(data, problem.corners), data.y);
    const auto ranking = rank_features(refit.importances().head(D));
    const std::size_t n = subset.size();
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n && i < ranking.size(); ++i) {
      if (std::binary_search(subset.begin(), subset.end(), ranking[i])) ++hits;
    }
    report.importance_overlap = n ? static_cast<double>(hits) / static_cast<double>(n) : 1.0;
  }
  return report;
}

AblationTable ablation_cross_corner(const BenchmarkProblem& problem, const Surrogate& surrogate,
                                    const AblationConfig& config) {
  const std::size_t K = problem.corner_count();
  if (K < 2) throw ConfigError("cross-corner ablation needs at least two corners");
  if (config.samples_per_corner < 1 || config.seeds < 1) {
    throw ConfigError("ablation needs positive samples_per_corner and seeds");
  }
  const Eigen::Index D = problem.dimension();
  const auto subset = all_indices(D);
  const auto n = static_cast<Eigen::Index>(config.samples_per_corner);

  AblationTable table;
  for (const auto& c : problem.corners) table.corners.push_back(c.id);
  table.errors.assign(K, std::vector<double>(K, 0.0));
  for (std::size_t s = 0; s < config.seeds; ++s) {
    const std::uint64_t seed = derive_seed(config.seed, s);
    std::vector<Dataset> per_corner(K);
    for (std::size_t k = 0; k < K; ++k) {
      Rng rng(derive_seed(seed, kStreamInit + k));
      const Eigen::MatrixXd x = gaussian_latin_hypercube(rng, n, D);
      per_corner[k].x.resize(0, D);
      per_corner[k].append(x, std::vector<std::size_t>(static_cast<std::size_t>(n), k), problem.evaluate_rows(x, k));
    }
    std::vector<std::vector<double>> grid(K, std::vector<double>(K, 0.0));
    for (std::size_t t = 0; t < K; ++t) {
      std::vector<std::size_t> others;
      for (std::size_t k = 0; k < K; ++k) {
        if (k != t) others.push_back(k);
      }
      Rng order_rng(derive_seed(seed, 500 + t));
      std::shuffle(others.begin(), others.end(), order_rng);
      Dataset ctx = per_corner[t];
      for (std::size_t level = 0; level < K; ++level) {
        if (level > 0) {
          const Dataset& add = per_corner[others[level - 1]];
          ctx.append(add.x, add.corner, add.y);
        }
        const auto post = surrogate.condition(joint_inputs(ctx, subset, problem.corners), ctx.y);
        const double est = estimate_yield(*post, subset, problem.corners[t], problem.specs[t], config.mc_samples,
                                          config.yield_mode, derive_seed(seed, kStreamYield + t));
        grid[t][level] = relative_error(est, problem.golden[t].value).percent;
        table.errors[t][level] += grid[t][level] / static_cast<double>(config.seeds);
      }
    }
    table.per_seed.push_back(std::move(grid));
  }
  return table;
}

}  // namespace ymca
