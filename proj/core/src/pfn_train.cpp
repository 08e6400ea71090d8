#include <cmath>
#include <ostream>

#include "pfn_network.hpp"
#include "pfn_preprocess.hpp"
#include "ymca/error.hpp"
#include "ymca/format.hpp"
#include "ymca/pfn.hpp"
#include "ymca/stats.hpp"

namespace ymca {

using detail::Layout;
using detail::Network;

namespace {

struct TaskShape {
  Eigen::Index dim, n_ctx, n_query;
};

TaskShape draw_shape(const MetaTrainConfig& c, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TaskShape s{};
  if (c.max_dim < c.model.max_features && unit(rng) < c.wide_fraction) {
    s.dim = std::uniform_int_distribution<Eigen::Index>(c.max_dim + 1, c.model.max_features)(rng);
  } else {
    s.dim = std::uniform_int_distribution<Eigen::Index>(c.min_dim, c.max_dim)(rng);
  }
  s.n_ctx = std::uniform_int_distribution<Eigen::Index>(c.min_context, c.max_context)(rng);
  s.n_query = c.queries;
  return s;
}

detail::NetInput<float> make_input(const PfnConfig& mc, const TaskSample& t,
                                   detail::ContextScaling& scaling) {
  scaling = detail::fit_scaling(t.context_z, t.context_y);
  detail::NetInput<float> in;
  Eigen::MatrixXd all(t.context_z.rows() + t.query_z.rows(), t.context_z.cols());
  all << t.context_z, t.query_z;
  in.features = detail::scaled_features<float>(scaling, all, mc.max_features);
  in.context_y = detail::standardized_targets<float>(scaling, t.context_y);
  in.n_ctx = t.context_z.rows();
  return in;
}

TaskSample draw_task(const MetaTrainConfig& c, std::uint64_t task_seed) {
  Rng rng(derive_seed(task_seed, 7));
  const TaskShape s = draw_shape(c, rng);
  return sample_prior_task(c.prior, s.dim, s.n_ctx, s.n_query, task_seed);
}

struct Adam {
  std::vector<float> m, v;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t t = 0;

  explicit Adam(std::size_t n) : m(n, 0.0f), v(n, 0.0f) {}

  void step(std::vector<float>& w, const std::vector<float>& g, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    const auto b1 = static_cast<float>(beta1), b2 = static_cast<float>(beta2);
    const auto step = static_cast<float>(lr / c1);
    const auto vc = static_cast<float>(1.0 / c2);
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      w[i] -= step * m[i] / (std::sqrt(v[i] * vc) + static_cast<float>(eps));
    }
  }
};

double schedule(const MetaTrainConfig& c, std::size_t step) {
  if (step < c.warmup_steps) {
    return c.learning_rate * static_cast<double>(step + 1) / static_cast<double>(c.warmup_steps);
  }
  const double span = static_cast<double>(std::max<std::size_t>(1, c.steps - c.warmup_steps));
  const double progress = static_cast<double>(step - c.warmup_steps) / span;
  // cosine decay to 10% of the peak rate
  return c.learning_rate * (0.1 + 0.45 * (1.0 + std::cos(3.141592653589793 * progress)));
}

}  // namespace

void MetaTrainConfig::validate() const {
  model.validate();
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (min_dim < 1 || max_dim < min_dim || max_dim > model.max_features) {
    throw ConfigError("task widths must satisfy 1 <= min_dim <= max_dim <= max_features");
  }
  if (min_context < 1 || max_context < min_context || max_context > model.max_context) {
    throw ConfigError("task contexts must satisfy 1 <= min_context <= max_context <= model max_context");
  }
  if (queries < 1) throw ConfigError("queries must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
}

MetaTrainResult meta_train(const MetaTrainConfig& config,
                           const std::function<void(const TrainLogRow&)>& on_log) {
  config.validate();
  const PfnConfig& mc = config.model;
  PfnModel init = PfnModel::initialize(mc, derive_seed(config.seed, 0));
  std::vector<float> w = init.weights();
  const Layout layout(mc);
  const Network<float> net(mc, layout);

  std::vector<TaskSample> validation;
  for (std::size_t i = 0; i < config.validation_tasks; ++i) {
    validation.push_back(draw_task(config, derive_seed(config.seed ^ 0x5eed5eedULL, i)));
  }
  auto validation_nll = [&](const std::vector<float>& weights) {
    if (validation.empty()) return std::numeric_limits<double>::quiet_NaN();
    const PfnModel snapshot(mc, weights, {});
    return mean_task_nll(snapshot, validation);
  };

  std::vector<TrainLogRow> log;
  std::vector<float> grad(w.size());
  Adam adam(w.size());
  detail::ForwardCache<float> cache;
  detail::ContextScaling scaling;
  double last_nll = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t step = 0; step < config.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0f);
    double loss = 0.0;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const TaskSample task = draw_task(config, derive_seed(config.seed, 1 + step * config.batch_size + b));
      const detail::NetInput<float> in = make_input(mc, task, scaling);
      const detail::ColVec<float> qy = detail::standardized_targets<float>(scaling, task.query_y);
      loss += net.loss_and_grad(w, in, qy, cache, grad, 1.0f / static_cast<float>(config.batch_size));
    }
    loss /= static_cast<double>(config.batch_size);
    if (!std::isfinite(loss)) throw TrainingError("meta-training diverged: non-finite NLL", step);

    double norm2 = 0.0;
    for (const float g : grad) norm2 += static_cast<double>(g) * g;
    const double norm = std::sqrt(norm2);
    if (!std::isfinite(norm)) throw TrainingError("meta-training diverged: non-finite gradient", step);
    if (norm > config.grad_clip) {
      const auto f = static_cast<float>(config.grad_clip / norm);
      for (auto& g : grad) g *= f;
    }
    adam.step(w, grad, schedule(config, step));
    last_nll = loss;

    TrainLogRow row{step + 1, loss, std::numeric_limits<double>::quiet_NaN()};
    const bool last = step + 1 == config.steps;
    if (config.validation_every > 0 && ((step + 1) % config.validation_every == 0 || last)) {
      row.validation_nll = validation_nll(w);
    }
    log.push_back(row);
    if (on_log) on_log(row);
  }

  PfnProvenance prov;
  prov.seed = config.seed;
  prov.task_count = config.task_count();
  prov.steps = config.steps;
  prov.final_nll = config.steps > 0 ? last_nll : std::numeric_limits<double>::quiet_NaN();
  return {PfnModel(mc, std::move(w), prov), std::move(log)};
}

void write_training_log(std::ostream& out, const std::vector<TrainLogRow>& log) {
  out << "step,train_nll,validation_nll\n";
  for (const auto& r : log) {
    out << r.step << ',' << format_double(r.train_nll) << ',';
    if (std::isfinite(r.validation_nll)) out << format_double(r.validation_nll);
    out << '\n';
  }
}

double mean_task_nll(const PfnModel& model, const std::vector<TaskSample>& tasks) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& t : tasks) {
    const auto preds = predict(model, t.context_z, t.context_y, t.query_z);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      total += gaussian_nll(t.query_y[static_cast<Eigen::Index>(i)], preds[i].mean, preds[i].stddev);
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
}

double context_gaussian_nll(const std::vector<TaskSample>& tasks) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& t : tasks) {
    const double mu = t.context_y.mean();
    const double sd = std::max(std::sqrt((t.context_y.array() - mu).square().mean()), 1e-12);
    for (Eigen::Index i = 0; i < t.query_y.size(); ++i) {
      total += gaussian_nll(t.query_y[i], mu, sd);
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace ymca
