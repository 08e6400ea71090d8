#include "ymca/gp.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>

#include "ymca/error.hpp"
#include "ymca/stats.hpp"

namespace ymca {
namespace {

constexpr double kLogLengthMin = -4.6;  // ~0.01
constexpr double kLogLengthMax = 6.9;   // ~1000
constexpr double kLogSignalMin = -4.6;
constexpr double kLogSignalMax = 4.6;
constexpr double kLogNoiseMax = 0.0;

Eigen::MatrixXd kernel(const Eigen::Ref<const Eigen::MatrixXd>& a,
                       const Eigen::Ref<const Eigen::MatrixXd>& b, const GpHyperparameters& h) {
  const Eigen::ArrayXd inv = h.lengthscales.array().inverse();
  const Eigen::MatrixXd as = a * inv.matrix().asDiagonal();
  const Eigen::MatrixXd bs = b * inv.matrix().asDiagonal();
  Eigen::MatrixXd d2 = (-2.0 * as * bs.transpose()).eval();
  d2.colwise() += as.rowwise().squaredNorm();
  d2.rowwise() += bs.rowwise().squaredNorm().transpose();
  return h.signal_variance * (-0.5 * d2.array().max(0.0)).exp().matrix();
}

/// Cholesky of k with escalating diagonal jitter.
Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& k) {
  const Eigen::Index n = k.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  double jitter = 1e-10 * std::max(1.0, k.diagonal().mean());
  while (llt.info() != Eigen::Success) {
    if (jitter > 1e-2) throw NumericalError("GP Gram matrix is ill-conditioned beyond jitter 1e-2");
    llt.compute(k + jitter * Eigen::MatrixXd::Identity(n, n));
    jitter *= 10.0;
  }
  return llt;
}

Eigen::VectorXd pack(const GpHyperparameters& h) {
  const Eigen::Index d = h.lengthscales.size();
  Eigen::VectorXd t(d + 2);
  t.head(d) = h.lengthscales.array().log();
  t[d] = std::log(h.signal_variance);
  t[d + 1] = std::log(h.noise_variance);
  return t;
}

GpHyperparameters unpack(const Eigen::VectorXd& t) {
  const Eigen::Index d = t.size() - 2;
  GpHyperparameters h;
  h.lengthscales = t.head(d).array().exp();
  h.signal_variance = std::exp(t[d]);
  h.noise_variance = std::exp(t[d + 1]);
  return h;
}

void clamp(Eigen::VectorXd& t, double log_noise_min) {
  const Eigen::Index d = t.size() - 2;
  for (Eigen::Index j = 0; j < d; ++j) t[j] = std::clamp(t[j], kLogLengthMin, kLogLengthMax);
  t[d] = std::clamp(t[d], kLogSignalMin, kLogSignalMax);
  t[d + 1] = std::clamp(t[d + 1], log_noise_min, kLogNoiseMax);
}

struct Standardized {
  Eigen::MatrixXd z;
  Eigen::VectorXd y, z_mean, z_scale;
  double y_mean = 0.0, y_scale = 1.0;
};

Standardized standardize(const Eigen::Ref<const Eigen::MatrixXd>& z,
                         const Eigen::Ref<const Eigen::VectorXd>& y) {
  Standardized s;
  s.z_mean = z.colwise().mean().transpose();
  s.z_scale = ((z.rowwise() - s.z_mean.transpose()).array().square().colwise().mean().sqrt()).transpose();
  for (Eigen::Index j = 0; j < s.z_scale.size(); ++j) {
    if (!(s.z_scale[j] > 1e-12)) s.z_scale[j] = 1.0;
  }
  s.z = (z.rowwise() - s.z_mean.transpose()).array().rowwise() / s.z_scale.transpose().array();
  s.y_mean = y.mean();
  const double sd = std::sqrt((y.array() - s.y_mean).square().mean());
  s.y_scale = std::max(sd, 1e-12 * (1.0 + std::abs(s.y_mean)));
  s.y = (y.array() - s.y_mean) / s.y_scale;
  return s;
}

}  // namespace

double gp_log_marginal_likelihood(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                  const Eigen::Ref<const Eigen::VectorXd>& y,
                                  const GpHyperparameters& h, Eigen::VectorXd* gradient) {
  const Eigen::Index n = z.rows();
  const Eigen::Index d = z.cols();
  const Eigen::MatrixXd kf = kernel(z, z, h);
  Eigen::MatrixXd k = kf;
  k.diagonal().array() += h.noise_variance;
  const auto llt = robust_cholesky(k);
  const Eigen::VectorXd alpha = llt.solve(y);
  const Eigen::MatrixXd l = llt.matrixL();
  const double lml = -0.5 * y.dot(alpha) - l.diagonal().array().log().sum() -
                     0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  if (gradient) {
    const Eigen::MatrixXd kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd w = alpha * alpha.transpose() - kinv;
    const Eigen::MatrixXd wk = w.cwiseProduct(kf);
    gradient->resize(d + 2);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double inv2 = 1.0 / (h.lengthscales[j] * h.lengthscales[j]);
      double acc = 0.0;
      for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index r = 0; r < n; ++r) {
          const double diff = z(r, j) - z(c, j);
          acc += wk(r, c) * diff * diff;
        }
      }
      (*gradient)[j] = 0.5 * acc * inv2;
    }
    (*gradient)[d] = 0.5 * wk.sum();
    (*gradient)[d + 1] = 0.5 * h.noise_variance * w.trace();
  }
  return lml;
}

std::unique_ptr<GpPosterior> gp_fit(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                    const Eigen::Ref<const Eigen::VectorXd>& y,
                                    const GpOptions& options) {
  if (z.rows() != y.size()) throw ShapeError("GP context inputs and targets differ in length");
  if (z.rows() < 2) throw InsufficientDataError("GP fit needs at least two context points");
  const Standardized s = standardize(z, y);
  const Eigen::Index d = z.cols();
  const double log_noise_min = std::log(options.noise_floor);

  Rng rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd best_theta;
  double best = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    GpHyperparameters h;
    if (r == 0) {
      h.lengthscales = Eigen::VectorXd::Constant(d, std::sqrt(static_cast<double>(d)));
      h.signal_variance = 1.0;
      h.noise_variance = 1e-2;
    } else {
      h.lengthscales.resize(d);
      for (Eigen::Index j = 0; j < d; ++j) {
        h.lengthscales[j] = std::exp(std::log(0.3) + unit(rng) * std::log(30.0 / 0.3));
      }
      h.signal_variance = std::exp(std::log(0.3) + unit(rng) * std::log(10.0));
      h.noise_variance = std::exp(std::log(1e-4) + unit(rng) * std::log(1e3));
    }
    Eigen::VectorXd theta = pack(h);
    clamp(theta, log_noise_min);
    // Adam ascent on the log marginal likelihood.
    Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
    Eigen::VectorXd grad;
    double value = -std::numeric_limits<double>::infinity();
    for (int t = 1; t <= options.steps; ++t) {
      try {
        value = gp_log_marginal_likelihood(s.z, s.y, unpack(theta), &grad);
      } catch (const NumericalError&) {
        value = -std::numeric_limits<double>::infinity();
        break;
      }
      m = 0.9 * m + 0.1 * grad;
      v = 0.999 * v + 0.001 * grad.cwiseProduct(grad);
      const Eigen::VectorXd mh = m / (1.0 - std::pow(0.9, t));
      const Eigen::VectorXd vh = v / (1.0 - std::pow(0.999, t));
      theta += options.learning_rate * (mh.array() / (vh.array().sqrt() + 1e-8)).matrix();
      clamp(theta, log_noise_min);
    }
    try {
      value = gp_log_marginal_likelihood(s.z, s.y, unpack(theta));
    } catch (const NumericalError&) {
      continue;
    }
    if (value > best) {
      best = value;
      best_theta = theta;
    }
  }
  if (best_theta.size() == 0) throw NumericalError("GP fit failed for every restart");
  return std::make_unique<GpPosterior>(z, y, unpack(best_theta), best);
}

GpPosterior::GpPosterior(const Eigen::Ref<const Eigen::MatrixXd>& z,
                         const Eigen::Ref<const Eigen::VectorXd>& y, GpHyperparameters h,
                         double log_marginal_likelihood)
    : h_(std::move(h)), lml_(log_marginal_likelihood) {
  Standardized s = standardize(z, y);
  z_ = std::move(s.z);
  z_mean_ = std::move(s.z_mean);
  z_scale_ = std::move(s.z_scale);
  y_mean_ = s.y_mean;
  y_scale_ = s.y_scale;
  Eigen::MatrixXd k = kernel(z_, z_, h_);
  k.diagonal().array() += h_.noise_variance;
  const auto llt = robust_cholesky(k);
  chol_ = llt.matrixL();
  alpha_ = llt.solve(s.y);
}

void GpPosterior::predict(const Eigen::Ref<const Eigen::MatrixXd>& queries, Eigen::VectorXd& mean,
                          Eigen::VectorXd& stddev) const {
  if (queries.rows() > 0 && queries.cols() != z_.cols()) {
    throw ShapeError("query width does not match GP context width");
  }
  const Eigen::MatrixXd q =
      (queries.rowwise() - z_mean_.transpose()).array().rowwise() / z_scale_.transpose().array();
  const Eigen::MatrixXd ks = kernel(q, z_, h_);  // m x n
  mean = (ks * alpha_).array() * y_scale_ + y_mean_;
  const Eigen::MatrixXd v = chol_.triangularView<Eigen::Lower>().solve(ks.transpose());
  const Eigen::ArrayXd var =
      (h_.signal_variance - v.colwise().squaredNorm().transpose().array()).max(0.0) + h_.noise_variance;
  stddev = var.sqrt() * y_scale_;
}

std::vector<Prediction> gp_fit_predict(const Eigen::Ref<const Eigen::MatrixXd>& context_z,
                                       const Eigen::Ref<const Eigen::VectorXd>& context_y,
                                       const Eigen::Ref<const Eigen::MatrixXd>& queries,
                                       const GpOptions& options) {
  return gp_fit(context_z, context_y, options)->predict(queries);
}

std::unique_ptr<Posterior> GpSurrogate::condition(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                                  const Eigen::Ref<const Eigen::VectorXd>& y) const {
  return gp_fit(z, y, options_);
}

}  // namespace ymca
