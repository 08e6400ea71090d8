#include "ymca/bench.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "ymca/error.hpp"

namespace ymca {
namespace {

constexpr double kMaxSigma = 6.0;
constexpr std::int64_t kCalibrationSamples = 200'000;
constexpr Eigen::Index kChunk = 8192;

double process_skew(char letter, const std::string& corner) {
  switch (letter) {
    case 'F': return 1.0;
    case 'T': return 0.0;
    case 'S': return -1.0;
    default:
      throw ConfigError("corner " + corner + ": process code letters must be T, F or S");
  }
}

bool is_process_code(const std::string& s) {
  return s.size() == 2 && std::string("TFS").find(s[0]) != std::string::npos &&
         std::string("TFS").find(s[1]) != std::string::npos;
}

double rescale(double v, double lo, double hi) {
  if (hi - lo <= 0.0) return 0.0;
  return 2.0 * (v - lo) / (hi - lo) - 1.0;
}

Eigen::VectorXd unit_gaussian(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v = standard_normal(rng, n, 1);
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

}  // namespace

std::vector<CornerSpec> reference_corners() {
  std::vector<CornerSpec> corners = {
      {"TT", 1.0, 25.0, "TT", {}},  {"FF", 1.1, 0.0, "FF", {}},
      {"SF", 1.0, 25.0, "SF", {}},  {"FS", 1.0, 25.0, "FS", {}},
      {"SS", 0.9, 125.0, "SS", {}},
  };
  encode_corners(corners);
  return corners;
}

void encode_corners(std::vector<CornerSpec>& corners) {
  if (corners.empty()) throw ConfigError("corner set is empty");
  std::set<std::string> seen;
  double vlo = corners.front().voltage, vhi = vlo;
  double tlo = corners.front().temperature, thi = tlo;
  for (auto& c : corners) {
    if (c.id.empty()) throw ConfigError("corner id must not be empty");
    if (!seen.insert(c.id).second) throw ConfigError("duplicate corner id " + c.id);
    if (c.process.empty()) c.process = is_process_code(c.id) ? c.id : "TT";
    if (c.process.size() != 2) {
      throw ConfigError("corner " + c.id + ": process code must have two letters");
    }
    vlo = std::min(vlo, c.voltage);
    vhi = std::max(vhi, c.voltage);
    tlo = std::min(tlo, c.temperature);
    thi = std::max(thi, c.temperature);
  }
  for (auto& c : corners) {
    c.encoding.resize(kCornerEncodingSize);
    c.encoding << rescale(c.voltage, vlo, vhi), rescale(c.temperature, tlo, thi),
        process_skew(c.process[0], c.id), process_skew(c.process[1], c.id);
  }
}

Eigen::MatrixXd VariationModel::sample(Rng& rng, Eigen::Index n) const {
  return standard_normal(rng, n, dimension);
}

Eigen::Index BenchmarkProblem::encoding_size() const {
  return corners.empty() ? 0 : corners.front().encoding.size();
}

std::size_t BenchmarkProblem::corner_index(const std::string& id) const {
  for (std::size_t k = 0; k < corners.size(); ++k) {
    if (corners[k].id == id) return k;
  }
  throw LookupError("unknown corner id '" + id + "'");
}

double BenchmarkProblem::evaluate_support(const Eigen::Ref<const Eigen::VectorXd>& xs,
                                          std::size_t k) const {
  const CornerModel& m = models[k];
  double y = m.offset;
  const auto s = static_cast<Eigen::Index>(support.size());
  for (Eigen::Index i = 0; i < s; ++i) {
    y += m.weights[support[static_cast<std::size_t>(i)]] * xs[i];
  }
  if (family.interactions) {
    for (Eigen::Index i = 0; i < s; ++i) {
      for (Eigen::Index j = i + 1; j < s; ++j) y += m.interaction(i, j) * xs[i] * xs[j];
    }
  }
  if (family.quadratic) {
    for (Eigen::Index i = 0; i < s; ++i) y += m.quadratic[i] * xs[i] * xs[i];
  }
  return y;
}

double BenchmarkProblem::evaluate(const Eigen::Ref<const Eigen::VectorXd>& x,
                                  std::size_t k) const {
  if (x.size() != dimension()) {
    throw ShapeError("evaluate: expected " + std::to_string(dimension()) +
                     " process parameters, got " + std::to_string(x.size()));
  }
  if (k >= corners.size()) throw LookupError("corner index out of range");
  Eigen::VectorXd xs(static_cast<Eigen::Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i) {
    xs[static_cast<Eigen::Index>(i)] = x[support[i]];
  }
  return evaluate_support(xs, k);
}

Eigen::VectorXd BenchmarkProblem::evaluate_rows(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                                std::size_t k) const {
  Eigen::VectorXd y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y[i] = evaluate(x.row(i).transpose(), k);
  return y;
}

BenchmarkProblem generate_problem(const SramLikeFamily& family, std::uint64_t seed) {
  if (family.support_size < 1) throw GenerationError("support size must be at least 1");
  if (family.dimension < family.support_size) {
    throw GenerationError("dimension must be at least the support size");
  }
  if (!(family.coupling >= 0.0 && family.coupling <= 1.0)) {
    throw GenerationError("corner coupling must lie in [0, 1]");
  }
  if (family.golden_samples < 1) throw GenerationError("golden sample count must be positive");

  BenchmarkProblem p;
  p.family = family;
  p.seed = seed;
  p.corners = family.corners;
  encode_corners(p.corners);
  p.family.corners = p.corners;

  Rng rng(seed);
  const Eigen::Index D = family.dimension;
  const Eigen::Index s = family.support_size;

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(D));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (Eigen::Index i = 0; i < s; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, D - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  p.support.assign(idx.begin(), idx.begin() + s);
  std::sort(p.support.begin(), p.support.end());

  // Mixing w_k = a*u + sqrt(1 - a^2)*v_k with v_k a unit vector orthogonal to u
  // gives cos(w_j, w_k) = a^2 + (1 - a^2) v_j.v_k >= 2a^2 - 1 = rho.
  const double a = std::sqrt(0.5 * (1.0 + family.coupling));
  const double c = std::sqrt(std::max(0.0, 1.0 - a * a));
  const Eigen::VectorXd shared = unit_gaussian(rng, s);
  const double scale = family.nonlinear_strength / std::sqrt(static_cast<double>(s));
  const Eigen::MatrixXd shared_interaction = standard_normal(rng, s, s);
  const Eigen::VectorXd shared_quadratic = standard_normal(rng, s, 1);
  std::normal_distribution<double> normal;

  for (std::size_t k = 0; k < p.corners.size(); ++k) {
    CornerModel m;
    Eigen::VectorXd v = standard_normal(rng, s, 1);
    v -= v.dot(shared) * shared;
    const double vn = v.norm();
    if (s > 1 && vn > 1e-12) {
      v /= vn;
    } else {
      v.setZero();
    }
    const Eigen::VectorXd w = a * shared + c * v;
    m.weights = Eigen::VectorXd::Zero(D);
    for (Eigen::Index i = 0; i < s; ++i) m.weights[p.support[static_cast<std::size_t>(i)]] = w[i];
    m.offset = std::sqrt(1.0 - family.coupling) * normal(rng);

    const Eigen::MatrixXd own_interaction = standard_normal(rng, s, s);
    const Eigen::VectorXd own_quadratic = standard_normal(rng, s, 1);
    m.interaction = Eigen::MatrixXd::Zero(s, s);
    m.quadratic = Eigen::VectorXd::Zero(s);
    if (family.interactions) {
      m.interaction = (scale * (a * shared_interaction + c * own_interaction))
                          .triangularView<Eigen::StrictlyUpper>();
    }
    if (family.quadratic) m.quadratic = scale * (a * shared_quadratic + c * own_quadratic);
    p.models.push_back(std::move(m));
  }

  const double tail_lo = normal_cdf(-kMaxSigma);
  const double tail_hi = normal_cdf(kMaxSigma);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  p.specs.resize(p.corners.size());
  for (std::size_t k = 0; k < p.corners.size(); ++k) {
    const std::string& id = p.corners[k].id;
    const auto it = family.bands.find(id);
    const YieldBand band = it == family.bands.end() ? family.default_band : it->second;
    if (!(band.lo <= band.hi) || band.lo < 0.0 || band.hi > 1.0) {
      throw GenerationError("corner " + id + ": yield band must satisfy 0 <= lo <= hi <= 1");
    }
    const double lo = std::max(band.lo, tail_lo);
    const double hi = std::min(band.hi, tail_hi);
    if (lo > hi) {
      throw GenerationError("corner " + id +
                            ": yield band cannot be reached with a spec inside +/-6 sigma");
    }
    const double target = lo + (hi - lo) * unit(rng);

    if (family.affine()) {
      p.specs[k] = p.models[k].offset - p.weight_norm(k) * normal_quantile(target);
    } else {
      Rng cal(derive_seed(seed, 500 + k));
      const std::int64_t m = std::min(family.golden_samples, kCalibrationSamples);
      std::vector<double> values(static_cast<std::size_t>(m));
      for (std::int64_t i = 0; i < m; ++i) {
        const Eigen::VectorXd xs = standard_normal(cal, s, 1);
        values[static_cast<std::size_t>(i)] = p.evaluate_support(xs, k);
      }
      std::sort(values.begin(), values.end());
      // Spec sits between order statistics so that a `target` fraction exceeds it.
      auto j = static_cast<std::int64_t>(std::llround((1.0 - target) * static_cast<double>(m)));
      j = std::clamp<std::int64_t>(j, 1, m - 1);
      p.specs[k] = 0.5 * (values[static_cast<std::size_t>(j - 1)] +
                          values[static_cast<std::size_t>(j)]);
    }
  }

  for (std::size_t k = 0; k < p.corners.size(); ++k) {
    p.golden.push_back(family.affine()
                           ? golden_yield(p, k, GoldenMode::Analytic)
                           : golden_yield(p, k, GoldenMode::BruteForce, family.golden_samples,
                                          derive_seed(seed, 1000 + k)));
  }
  return p;
}

GoldenYield golden_yield(const BenchmarkProblem& problem, std::size_t corner, GoldenMode mode,
                         std::int64_t samples, std::uint64_t seed) {
  if (corner >= problem.corner_count()) throw LookupError("corner index out of range");
  GoldenYield g;
  g.provenance = mode;
  const double spec = problem.specs[corner];
  if (mode == GoldenMode::Analytic) {
    if (!problem.affine()) {
      throw ModeError("analytic golden yield requires an affine evaluator");
    }
    const double norm = problem.weight_norm(corner);
    const double b = problem.models[corner].offset;
    g.value = norm > 0.0 ? normal_cdf((b - spec) / norm) : (b > spec ? 1.0 : 0.0);
    return g;
  }
  if (samples < 1) throw DomainError("brute-force golden yield needs at least one sample");
  Rng rng(seed);
  const auto s = static_cast<Eigen::Index>(problem.support.size());
  std::int64_t pass = 0;
  for (std::int64_t done = 0; done < samples; done += kChunk) {
    const Eigen::Index n = static_cast<Eigen::Index>(std::min<std::int64_t>(kChunk, samples - done));
    // Evaluators only read support coordinates, so the remaining D - s
    // components need not be drawn.
    const Eigen::MatrixXd xs = standard_normal(rng, n, s);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (problem.evaluate_support(xs.row(i).transpose(), corner) > spec) ++pass;
    }
  }
  g.samples = samples;
  g.value = static_cast<double>(pass) / static_cast<double>(samples);
  g.std_error = std::sqrt(g.value * (1.0 - g.value) / static_cast<double>(samples));
  return g;
}

std::vector<double> evaluate_batch(
    const BenchmarkProblem& problem,
    const std::vector<std::pair<Eigen::VectorXd, std::string>>& points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& [x, id] : points) out.push_back(problem.evaluate(x, problem.corner_index(id)));
  return out;
}

std::string to_string(GoldenMode mode) {
  return mode == GoldenMode::Analytic ? "analytic" : "brute-force";
}

GoldenMode golden_mode_from_string(const std::string& s) {
  if (s == "analytic") return GoldenMode::Analytic;
  if (s == "brute-force") return GoldenMode::BruteForce;
  throw ConfigError("unknown golden mode '" + s + "'");
}

}  // namespace ymca
