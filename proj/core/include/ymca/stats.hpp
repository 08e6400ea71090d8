#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <span>

namespace ymca {

using Rng = std::mt19937_64;

/// Mixes a base seed with a stream id so that independent consumers of one
/// run seed get decorrelated generators (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

double normal_pdf(double z);
double normal_cdf(double z);
/// Inverse of normal_cdf on (0, 1).
double normal_quantile(double p);

/// Fills an n x d matrix with i.i.d. standard normal draws, row by row.
Eigen::MatrixXd standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols);

/// Latin hypercube design on (0,1)^d: every column has exactly one point in
/// each of the n equiprobable strata.
Eigen::MatrixXd latin_hypercube(Rng& rng, Eigen::Index n, Eigen::Index d);

/// Latin hypercube mapped through the Gaussian inverse CDF.
Eigen::MatrixXd gaussian_latin_hypercube(Rng& rng, Eigen::Index n, Eigen::Index d);

double mean(std::span<const double> v);
double median(std::span<const double> v);

}  // namespace ymca
