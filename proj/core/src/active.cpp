#include "ymca/active.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "ymca/dataset.hpp"
#include "ymca/error.hpp"
#include "ymca/format.hpp"
#include "ymca/stats.hpp"

namespace ymca {
namespace {

constexpr std::size_t kLoggedRunnersUp = 4;

Eigen::MatrixXd project(const Eigen::Ref<const Eigen::MatrixXd>& pool, std::span<const Eigen::Index> subset) {
  Eigen::MatrixXd out(pool.rows(), static_cast<Eigen::Index>(subset.size()));
  for (std::size_t j = 0; j < subset.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = pool.col(subset[j]);
  return out;
}

}  // namespace

double acquisition(double mean, double stddev, double spec) {
  if (!(stddev > 0.0)) throw DomainError("acquisition needs a strictly positive stddev");
  if (stddev < 1e-12) return 0.0;
  return stddev * normal_pdf((mean - spec) / stddev);
}

JointAcquisition joint_acquisition(std::span<const double> values) {
  JointAcquisition best;
  best.value = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k] > best.value) {
      best.value = values[k];
      best.corner = k;
    }
  }
  if (values.empty()) best.value = 0.0;
  return best;
}

JointAcquisition joint_acquisition(std::span<const Prediction> predictions, std::span<const double> specs) {
  if (predictions.size() != specs.size()) throw ShapeError("one prediction per corner spec is required");
  std::vector<double> values(predictions.size());
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    values[k] = acquisition(predictions[k].mean, predictions[k].stddev, specs[k]);
  }
  return joint_acquisition(values);
}

PoolScores score_pool(const Posterior& posterior, const Eigen::Ref<const Eigen::MatrixXd>& pool,
                      std::span<const Eigen::Index> subset, const std::vector<CornerSpec>& corners,
                      std::span<const double> specs) {
  if (specs.size() != corners.size()) throw ShapeError("one spec per corner is required");
  PoolScores s;
  s.acquisition.resize(pool.rows(), static_cast<Eigen::Index>(corners.size()));
  s.stddev.resize(pool.rows(), static_cast<Eigen::Index>(corners.size()));
  Eigen::VectorXd mu, sd;
  for (std::size_t k = 0; k < corners.size(); ++k) {
    posterior.predict(joint_inputs(pool, subset, corners[k]), mu, sd);
    const auto col = static_cast<Eigen::Index>(k);
    for (Eigen::Index i = 0; i < pool.rows(); ++i) {
      s.acquisition(i, col) = acquisition(mu[i], sd[i], specs[k]);
      s.stddev(i, col) = sd[i];
    }
  }
  return s;
}

double median_nearest_neighbor(const Eigen::Ref<const Eigen::MatrixXd>& pool,
                               std::span<const Eigen::Index> subset) {
  const Eigen::MatrixXd z = project(pool, subset);
  const Eigen::Index n = z.rows();
  if (n < 2) return 1.0;
  const Eigen::VectorXd norms = z.rowwise().squaredNorm();
  std::vector<double> nearest(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  constexpr Eigen::Index kBlock = 512;
  for (Eigen::Index b = 0; b < n; b += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n - b);
    Eigen::MatrixXd d2 = -2.0 * z.middleRows(b, rows) * z.transpose();
    d2.colwise() += norms.segment(b, rows);
    d2.rowwise() += norms.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      d2(r, b + r) = std::numeric_limits<double>::infinity();
      nearest[static_cast<std::size_t>(b + r)] = std::sqrt(std::max(0.0, d2.row(r).minCoeff()));
    }
  }
  return median(nearest);
}

BatchSelection select_from_pool(const PoolScores& scores, const Eigen::Ref<const Eigen::MatrixXd>& pool,
                                std::span<const Eigen::Index> subset, const AcquisitionConfig& config) {
  const Eigen::Index c = pool.rows();
  if (config.batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (static_cast<std::size_t>(c) < config.batch_size) throw ConfigError("candidate pool smaller than batch size");
  BatchSelection sel;

  Eigen::VectorXd joint(c);
  std::vector<std::size_t> corner(static_cast<std::size_t>(c));
  for (Eigen::Index i = 0; i < c; ++i) {
    const Eigen::VectorXd row = scores.acquisition.row(i).transpose();
    const JointAcquisition j = joint_acquisition(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
    joint[i] = j.value;
    corner[static_cast<std::size_t>(i)] = j.corner;
  }

  if (!(joint.maxCoeff() > 0.0)) {
    // Nothing informative: spend the batch where the surrogate is least sure.
    sel.fallback = true;
    std::vector<std::pair<double, Eigen::Index>> by_sigma;
    for (Eigen::Index i = 0; i < c; ++i) {
      Eigen::Index k = 0;
      const double s = scores.stddev.row(i).maxCoeff(&k);
      by_sigma.emplace_back(s, i);
      corner[static_cast<std::size_t>(i)] = static_cast<std::size_t>(k);
    }
    std::stable_sort(by_sigma.begin(), by_sigma.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const Eigen::Index i = by_sigma[b].second;
      sel.picks.push_back({static_cast<std::size_t>(i), pool.row(i).transpose(), corner[static_cast<std::size_t>(i)], 0.0, 0.0});
      sel.log.push_back({b, static_cast<std::size_t>(i), corner[static_cast<std::size_t>(i)], 0.0, 0.0, true});
    }
    return sel;
  }

  const Eigen::MatrixXd z = project(pool, subset);
  if (config.batch_size > 1) {
    sel.penalty_width = config.penalty_width ? *config.penalty_width : median_nearest_neighbor(pool, subset);
    if (!(sel.penalty_width > 0.0)) sel.penalty_width = 1.0;
  }
  Eigen::VectorXd penalty = Eigen::VectorXd::Zero(c);
  std::vector<bool> taken(static_cast<std::size_t>(c), false);
  for (std::size_t b = 0; b < config.batch_size; ++b) {
    std::vector<std::pair<double, Eigen::Index>> ranked;
    ranked.reserve(static_cast<std::size_t>(c));
    for (Eigen::Index i = 0; i < c; ++i) {
      if (!taken[static_cast<std::size_t>(i)]) ranked.emplace_back(joint[i] - penalty[i], i);
    }
    const std::size_t top = std::min(ranked.size(), kLoggedRunnersUp + 1);
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(top), ranked.end(),
                      [](const auto& a, const auto& x) {
                        return a.first > x.first || (a.first == x.first && a.second < x.second);
                      });
    const Eigen::Index pick = ranked.front().second;
    for (std::size_t r = 0; r < top; ++r) {
      const Eigen::Index i = ranked[r].second;
      sel.log.push_back({b, static_cast<std::size_t>(i), corner[static_cast<std::size_t>(i)], joint[i], penalty[i], r == 0});
    }
    taken[static_cast<std::size_t>(pick)] = true;
    sel.picks.push_back({static_cast<std::size_t>(pick), pool.row(pick).transpose(),
                         corner[static_cast<std::size_t>(pick)], joint[pick], penalty[pick]});
    if (b + 1 == config.batch_size) break;
    if (b == 0) {
      sel.penalty_strength = config.penalty_strength ? *config.penalty_strength : joint[pick];
    }
    const double inv = 1.0 / (2.0 * sel.penalty_width * sel.penalty_width);
    const Eigen::VectorXd d2 = (z.rowwise() - z.row(pick)).rowwise().squaredNorm();
    penalty.array() += sel.penalty_strength * (-d2.array() * inv).exp();
  }
  return sel;
}

BatchSelection select_batch(const Posterior& posterior, Eigen::Index dimension,
                            std::span<const Eigen::Index> subset,
                            const std::vector<CornerSpec>& corners, std::span<const double> specs,
                            const AcquisitionConfig& config, std::uint64_t seed) {
  if (config.pool_size < config.batch_size) throw ConfigError("candidate pool smaller than batch size");
  Rng rng(seed);
  const Eigen::MatrixXd pool = standard_normal(rng, static_cast<Eigen::Index>(config.pool_size), dimension);
  const PoolScores scores = score_pool(posterior, pool, subset, corners, specs);
  return select_from_pool(scores, pool, subset, config);
}

void write_selection_log_header(std::ostream& out) {
  out << "round,step,pool_index,corner,acquisition,penalty,chosen\n";
}

void write_selection_log(std::ostream& out, std::size_t round, const BatchSelection& selection,
                         const std::vector<CornerSpec>& corners) {
  for (const auto& r : selection.log) {
    out << round << ',' << r.step << ',' << r.pool_index << ',' << corners.at(r.corner).id << ','
        << format_double(r.acquisition) << ',' << format_double(r.penalty) << ',' << (r.chosen ? 1 : 0)
        << '\n';
  }
}

}  // namespace ymca
