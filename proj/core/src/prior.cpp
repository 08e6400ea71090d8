#include "ymca/prior.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "ymca/error.hpp"
#include "ymca/stats.hpp"

namespace ymca {
namespace {

double log_uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

// Per-dimension relevance: a random subset of inputs (at least one) drives
// the function, the rest are inert.
Eigen::VectorXd draw_relevance(Rng& rng, Eigen::Index dim) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double keep = unit(rng);
  Eigen::VectorXd r(dim);
  for (Eigen::Index j = 0; j < dim; ++j) r[j] = unit(rng) < keep ? 1.0 : 0.0;
  if (r.sum() == 0.0) {
    std::uniform_int_distribution<Eigen::Index> pick(0, dim - 1);
    r[pick(rng)] = 1.0;
  }
  return r;
}

Eigen::VectorXd gp_latent(Rng& rng, const PriorConfig& prior, const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const double ls = log_uniform(rng, prior.lengthscale_min, prior.lengthscale_max);
  const Eigen::VectorXd rel = draw_relevance(rng, d);
  // Squared distances are averaged over relevant dimensions so the
  // lengthscale keeps one meaning across input widths.
  const Eigen::VectorXd w = rel / (rel.sum() * ls * ls);
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double d2 = ((x.row(i) - x.row(j)).array().square() * w.transpose().array()).sum();
      k(i, j) = k(j, i) = std::exp(-0.5 * d2);
    }
  }
  Eigen::VectorXd e = standard_normal(rng, n, 1);
  for (double jitter = 1e-8; jitter < 1.0; jitter *= 10.0) {
    Eigen::LLT<Eigen::MatrixXd> llt(k + jitter * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) return llt.matrixL() * e;
  }
  throw NumericalError("GP prior covariance is not positive definite");
}

Eigen::VectorXd mlp_latent(Rng& rng, const Eigen::MatrixXd& x) {
  const Eigen::Index d = x.cols();
  std::uniform_int_distribution<Eigen::Index> width(8, 64);
  const Eigen::Index h = width(rng);
  const double gain = log_uniform(rng, 0.2, 3.0);
  const Eigen::VectorXd rel = draw_relevance(rng, d);
  const double active = rel.sum();
  Eigen::MatrixXd w1 = standard_normal(rng, d, h) * (gain / std::sqrt(active));
  for (Eigen::Index j = 0; j < d; ++j) w1.row(j) *= rel[j];
  const Eigen::RowVectorXd b1 = standard_normal(rng, 1, h) * gain * 0.5;
  const Eigen::MatrixXd w2 = standard_normal(rng, h, h) * (gain / std::sqrt(static_cast<double>(h)));
  const Eigen::RowVectorXd b2 = standard_normal(rng, 1, h) * gain * 0.5;
  const Eigen::VectorXd w3 = standard_normal(rng, h, 1);
  Eigen::MatrixXd a1 = ((x * w1).rowwise() + b1).array().tanh().matrix();
  Eigen::MatrixXd a2 = ((a1 * w2).rowwise() + b2).array().tanh().matrix();
  return a2 * w3;
}

}  // namespace

Eigen::MatrixXd sample_prior_inputs(Eigen::Index n, Eigen::Index dim, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(n, dim);
  const double half = std::sqrt(3.0);
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double kind = unit(rng);
    if (kind < 0.6) {
      for (Eigen::Index i = 0; i < n; ++i) x(i, j) = half * (2.0 * unit(rng) - 1.0);
    } else if (kind < 0.9) {
      for (Eigen::Index i = 0; i < n; ++i) x(i, j) = normal(rng);
    } else {
      std::uniform_int_distribution<int> levels(2, 5);
      const int l = levels(rng);
      std::uniform_int_distribution<int> pick(0, l - 1);
      // evenly spaced levels on [-1, 1] have variance (l + 1) / (3 (l - 1))
      const double unit_sd = std::sqrt((l + 1.0) / (3.0 * (l - 1.0)));
      for (Eigen::Index i = 0; i < n; ++i) {
        x(i, j) = (2.0 * pick(rng) / static_cast<double>(l - 1) - 1.0) / unit_sd;
      }
    }
  }
  return x;
}

Eigen::VectorXd sample_prior_values(const PriorConfig& prior,
                                    const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                    std::uint64_t seed, PriorKind* drawn_kind,
                                    double* drawn_noise) {
  if (inputs.cols() < 1) throw ShapeError("prior inputs need at least one column");
  const Eigen::Index n = inputs.rows();
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  PriorKind kind = prior.kind;
  if (kind == PriorKind::Mixture) kind = unit(rng) < prior.gp_fraction ? PriorKind::Gp : PriorKind::Mlp;
  const double noise = prior.noise_std ? *prior.noise_std : prior.noise_max * unit(rng);

  // Collapse duplicate rows so the latent function is single-valued.
  std::map<std::vector<double>, Eigen::Index> unique_index;
  std::vector<Eigen::Index> row_to_unique(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> unique_rows;
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> key(static_cast<std::size_t>(inputs.cols()));
    for (Eigen::Index j = 0; j < inputs.cols(); ++j) key[static_cast<std::size_t>(j)] = inputs(i, j);
    auto [it, inserted] = unique_index.emplace(std::move(key), static_cast<Eigen::Index>(unique_rows.size()));
    if (inserted) unique_rows.push_back(i);
    row_to_unique[static_cast<std::size_t>(i)] = it->second;
  }
  Eigen::MatrixXd ux(static_cast<Eigen::Index>(unique_rows.size()), inputs.cols());
  for (std::size_t u = 0; u < unique_rows.size(); ++u) ux.row(static_cast<Eigen::Index>(u)) = inputs.row(unique_rows[u]);

  Eigen::VectorXd f = kind == PriorKind::Gp ? gp_latent(rng, prior, ux) : mlp_latent(rng, ux);
  const double mu = f.mean();
  const double sd = std::sqrt((f.array() - mu).square().mean());
  f = sd > 1e-12 ? Eigen::VectorXd((f.array() - mu) / sd) : Eigen::VectorXd(f.array() - mu);

  std::normal_distribution<double> normal;
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = f[row_to_unique[static_cast<std::size_t>(i)]];
    if (noise > 0.0) y[i] += noise * normal(rng);
  }
  if (drawn_kind) *drawn_kind = kind;
  if (drawn_noise) *drawn_noise = noise;
  return y;
}

TaskSample sample_prior_task(const PriorConfig& prior, Eigen::Index dim, Eigen::Index n_ctx,
                             Eigen::Index n_query, std::uint64_t seed) {
  if (dim < 1) throw DomainError("prior task dimension must be at least 1");
  if (n_ctx < 1) throw DomainError("prior task needs at least one context point");
  if (n_query < 0) throw DomainError("query count must be non-negative");
  const Eigen::MatrixXd x = sample_prior_inputs(n_ctx + n_query, dim, derive_seed(seed, 1));
  TaskSample t;
  const Eigen::VectorXd y = sample_prior_values(prior, x, derive_seed(seed, 2), &t.kind, &t.noise_std);
  t.context_z = x.topRows(n_ctx);
  t.context_y = y.head(n_ctx);
  t.query_z = x.bottomRows(n_query);
  t.query_y = y.tail(n_query);
  return t;
}

}  // namespace ymca
