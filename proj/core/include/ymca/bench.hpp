#pragma once

// Synthetic multi-corner circuit benchmarks with known sparse structure.
//
// A problem evaluates f(x, c_k) = b_k + w_k^T x [+ interactions + quadratic]
// where x ~ N(0, I_D) and every non-zero coefficient lives on a small
// support set. The circuit passes at corner k when f(x, c_k) > Spec_k.

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ymca/stats.hpp"

namespace ymca {

/// Number of corner-encoding columns: normalized voltage, normalized
/// temperature, NMOS skew, PMOS skew.
inline constexpr Eigen::Index kCornerEncodingSize = 4;

struct CornerSpec {
  std::string id;
  double voltage = 0.0;      // volts
  double temperature = 0.0;  // degrees Celsius
  /// Two-letter process code (NMOS then PMOS; T, F or S). Defaults to the id
  /// when the id itself is such a code, "TT" otherwise.
  std::string process;
  Eigen::VectorXd encoding;
};

/// The five PVT combinations of the reference SRAM experiments.
std::vector<CornerSpec> reference_corners();

/// Fills `encoding` for every corner: voltage and temperature rescaled to
/// [-1, 1] over the set (0 when constant), process letters mapped to
/// F=+1, T=0, S=-1. Throws ConfigError on duplicate ids or bad codes.
void encode_corners(std::vector<CornerSpec>& corners);

struct VariationModel {
  Eigen::Index dimension = 1;

  /// n x D standard normal draws.
  Eigen::MatrixXd sample(Rng& rng, Eigen::Index n) const;
};

struct YieldBand {
  double lo = 0.0;
  double hi = 1.0;
};

/// Generator parameters for the SRAM-like benchmark family.
struct SramLikeFamily {
  Eigen::Index dimension = 144;
  Eigen::Index support_size = 6;
  double coupling = 0.9;  // rho: minimum pairwise cosine of corner weights
  bool quadratic = false;
  bool interactions = false;
  double nonlinear_strength = 0.4;
  std::vector<CornerSpec> corners = reference_corners();
  /// Per-corner golden-yield targets; corners missing here use default_band.
  std::map<std::string, YieldBand> bands;
  YieldBand default_band{0.5, 0.95};
  /// Sample count for brute-force golden yields and nonlinear calibration.
  std::int64_t golden_samples = 1'000'000;

  bool affine() const { return !quadratic && !interactions; }
};

/// Coefficients of one corner's performance function.
struct CornerModel {
  double offset = 0.0;
  Eigen::VectorXd weights;      // length D, zero outside the support
  Eigen::MatrixXd interaction;  // s x s strictly upper triangular, over support
  Eigen::VectorXd quadratic;    // length s, over support
};

enum class GoldenMode { Analytic, BruteForce };

struct GoldenYield {
  double value = 0.0;
  double std_error = 0.0;  // binomial standard error; 0 for analytic
  GoldenMode provenance = GoldenMode::Analytic;
  std::int64_t samples = 0;
};

class BenchmarkProblem {
 public:
  BenchmarkProblem() = default;

  SramLikeFamily family;
  std::uint64_t seed = 0;
  std::vector<CornerSpec> corners;
  std::vector<double> specs;                 // aligned with corners
  std::vector<Eigen::Index> support;         // sorted, zero-based
  std::vector<CornerModel> models;           // aligned with corners
  std::vector<GoldenYield> golden;           // aligned with corners

  Eigen::Index dimension() const { return family.dimension; }
  std::size_t corner_count() const { return corners.size(); }
  Eigen::Index encoding_size() const;
  bool affine() const { return family.affine(); }

  /// Throws LookupError for an unknown id.
  std::size_t corner_index(const std::string& id) const;
  double spec(const std::string& id) const { return specs[corner_index(id)]; }

  /// Performance at (x, corner k). x must have D entries.
  double evaluate(const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t k) const;

  /// Evaluates every row of `x` at corner k.
  Eigen::VectorXd evaluate_rows(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                std::size_t k) const;

  /// Same as evaluate but reads only the support coordinates, given in
  /// support order.
  double evaluate_support(const Eigen::Ref<const Eigen::VectorXd>& xs,
                          std::size_t k) const;

  /// Euclidean norm of the corner's linear weights.
  double weight_norm(std::size_t k) const { return models[k].weights.norm(); }
};

/// Generates a problem: support, per-corner coefficients with pairwise weight
/// cosine >= coupling, specs calibrated into each corner's yield band and
/// golden yields (analytic when affine, brute force otherwise).
BenchmarkProblem generate_problem(const SramLikeFamily& family, std::uint64_t seed);

/// Exact Gaussian tail (analytic) or Monte Carlo over `samples` fresh draws.
GoldenYield golden_yield(const BenchmarkProblem& problem, std::size_t corner,
                         GoldenMode mode, std::int64_t samples = 1'000'000,
                         std::uint64_t seed = 0);

/// Simulator stand-in: one output per (x, corner-id), positionally aligned.
std::vector<double> evaluate_batch(
    const BenchmarkProblem& problem,
    const std::vector<std::pair<Eigen::VectorXd, std::string>>& points);

std::string to_string(GoldenMode mode);
GoldenMode golden_mode_from_string(const std::string& s);

}  // namespace ymca
