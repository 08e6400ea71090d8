#include "doctest.h"
#include "helpers.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "pfn_network.hpp"
#include "pfn_preprocess.hpp"
#include "ymca/error.hpp"
#include "ymca/pfn.hpp"
#include "ymca/stats.hpp"

using namespace ymca;

namespace {

PfnConfig small_config() {
  PfnConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_layers = 2;
  c.d_ff = 24;
  c.max_features = 6;
  c.max_context = 40;
  return c;
}

}  // namespace

TEST_CASE("analytic gradient matches central differences") {
  using namespace ymca::detail;
  PfnConfig c = small_config();
  c.d_model = 8;
  c.d_ff = 12;
  c.max_features = 5;
  const Layout layout(c);
  const PfnModel m = PfnModel::initialize(c, 3);
  std::vector<double> w(m.weights().begin(), m.weights().end());
  Rng rng(1);
  std::normal_distribution<double> normal;
  for (auto& x : w) x += 0.1 * normal(rng);
  const TaskSample t = sample_prior_task(PriorConfig{}, 3, 7, 4, 11);
  const ContextScaling s = fit_scaling(t.context_z, t.context_y);
  NetInput<double> in;
  Eigen::MatrixXd all(11, 3);
  all << t.context_z, t.query_z;
  in.features = scaled_features<double>(s, all, c.max_features);
  in.context_y = standardized_targets<double>(s, t.context_y);
  in.n_ctx = 7;
  const ColVec<double> qy = standardized_targets<double>(s, t.query_y);
  const Network<double> net(c, layout);
  ForwardCache<double> cache;
  std::vector<double> g(w.size(), 0.0), scratch(w.size());
  net.loss_and_grad(w, in, qy, cache, g, 1.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double h = 1e-6;
    auto wp = w, wm = w;
    wp[i] += h;
    wm[i] -= h;
    const double num = (net.loss_and_grad(wp, in, qy, cache, scratch, 1.0) -
                        net.loss_and_grad(wm, in, qy, cache, scratch, 1.0)) / (2 * h);
    // one ulp of loss change over 2h is ~1e-10, so near-zero components need an absolute floor
    worst = std::max(worst, std::abs(num - g[i]) / std::max(1e-5, std::abs(num) + std::abs(g[i])));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("predictions are finite with positive spread and keep query order") {
  const PfnModel m = PfnModel::initialize(small_config(), 5);
  const auto t = sample_prior_task(PriorConfig{}, 4, 20, 9, 2);
  const auto p = predict(m, t.context_z, t.context_y, t.query_z);
  REQUIRE(p.size() == 9);
  for (const auto& q : p) {
    CHECK(std::isfinite(q.mean));
    CHECK(std::isfinite(q.stddev));
    CHECK(q.stddev > 0.0);
  }
  const auto single = predict(m, t.context_z, t.context_y, t.query_z.row(4));
  CHECK(single[0].mean == doctest::Approx(p[4].mean).epsilon(1e-5));
  CHECK(predict(m, t.context_z, t.context_y, Eigen::MatrixXd(0, 4)).empty());
}

TEST_CASE("context permutation leaves predictions unchanged") {
  const PfnModel m = PfnModel::initialize(small_config(), 8);
  const auto t = sample_prior_task(PriorConfig{}, 3, 25, 6, 4);
  std::vector<Eigen::Index> perm(25);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[3], perm[17]);
  Eigen::MatrixXd z(25, 3);
  Eigen::VectorXd y(25);
  for (Eigen::Index i = 0; i < 25; ++i) {
    z.row(i) = t.context_z.row(perm[static_cast<std::size_t>(i)]);
    y[i] = t.context_y[perm[static_cast<std::size_t>(i)]];
  }
  const auto a = predict(m, t.context_z, t.context_y, t.query_z);
  const auto b = predict(m, z, y, t.query_z);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(a[i].mean - b[i].mean) < 1e-5);
    CHECK(std::abs(a[i].stddev - b[i].stddev) < 1e-5);
  }
}

TEST_CASE("overflow errors") {
  const PfnModel m = PfnModel::initialize(small_config(), 1);
  const Eigen::MatrixXd wide = Eigen::MatrixXd::Random(10, 7);
  CHECK_THROWS_AS(predict(m, wide, Eigen::VectorXd::Random(10), wide), CapacityError);
  const Eigen::MatrixXd tall = Eigen::MatrixXd::Random(41, 2);
  CHECK_THROWS_AS(predict(m, tall, Eigen::VectorXd::Random(41), tall.topRows(2)), CapacityError);
  CHECK_THROWS_AS(predict(m, tall.topRows(5), Eigen::VectorXd::Random(5), Eigen::MatrixXd::Random(2, 3)),
                  ShapeError);
  const PfnSurrogate s(std::make_shared<PfnModel>(m));
  CHECK(s.max_context() == 40);
  CHECK(s.max_features() == 6);
  CHECK_THROWS_AS(s.condition(wide, Eigen::VectorXd::Random(10)), CapacityError);
}

TEST_CASE("attention weights are normalized") {
  const PfnModel m = PfnModel::initialize(small_config(), 6);
  const auto t = sample_prior_task(PriorConfig{}, 3, 30, 1, 7);
  const auto r = attention_weights(m, t.context_z, t.context_y, t.query_z.row(0).transpose());
  REQUIRE(r.weights.size() == 30);
  CHECK(r.weights.minCoeff() >= 0.0);
  CHECK(std::abs(r.weights.sum() - 1.0) < 1e-6);
  CHECK(r.effective_sample_size >= 1.0);
  CHECK(r.effective_sample_size <= 30.0 + 1e-9);
}

TEST_CASE("identical context points receive uniform attention") {
  const PfnModel m = PfnModel::initialize(small_config(), 6);
  const Eigen::MatrixXd z = Eigen::MatrixXd::Constant(12, 2, 0.4);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(12, 1.5);
  Eigen::VectorXd q(2);
  q << -0.3, 0.9;
  const auto r = attention_weights(m, z, y, q);
  for (Eigen::Index i = 0; i < 12; ++i) CHECK(r.weights[i] == doctest::Approx(1.0 / 12).epsilon(1e-9));
  CHECK(r.effective_sample_size == doctest::Approx(12.0));
}

TEST_CASE("softmax of logits (ln 2, 0) gives (2/3, 1/3)") {
  detail::Mat<double> p(1, 2);
  p << std::log(2.0), 0.0;
  detail::softmax_rows(p);
  CHECK(p(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(p(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("Kish effective size") {
  CHECK(kish_effective_size(Eigen::VectorXd::Constant(8, 0.125)) == doctest::Approx(8.0));
  Eigen::VectorXd w = Eigen::VectorXd::Zero(5);
  w[2] = 1.0;
  CHECK(kish_effective_size(w) == doctest::Approx(1.0));
}

TEST_CASE("constant context predicts the constant") {
  const PfnModel m = PfnModel::initialize(small_config(), 2);
  const Eigen::MatrixXd z = Eigen::MatrixXd::Random(10, 3);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(10, -4.25);
  const auto p = predict(m, z, y, Eigen::MatrixXd::Random(3, 3));
  for (const auto& q : p) {
    CHECK(q.mean == doctest::Approx(-4.25).epsilon(1e-9));
    CHECK(q.stddev > 0.0);
  }
}

TEST_CASE("checkpoint round trip is exact") {
  PfnModel m = PfnModel::initialize(small_config(), 10);
  PfnProvenance prov;
  prov.seed = 99;
  prov.task_count = 1234;
  prov.steps = 10;
  prov.final_nll = 0.75;
  prov.config_hash = "00112233aabbccdd";
  m = PfnModel(m.config(), m.weights(), prov);
  std::stringstream buf;
  m.save(buf);
  const PfnModel back = PfnModel::load(buf);
  CHECK(back.config() == m.config());
  CHECK(back.weights() == m.weights());
  CHECK(back.provenance().seed == 99);
  CHECK(back.provenance().task_count == 1234);
  CHECK(back.provenance().final_nll == 0.75);
  CHECK(back.provenance().config_hash == "00112233aabbccdd");

  std::stringstream junk("not a checkpoint at all");
  CHECK_THROWS_AS(PfnModel::load(junk), SchemaError);
  std::string bytes = buf.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS(PfnModel::load(truncated));
}

TEST_CASE("zero training steps leave the initialization untouched") {
  MetaTrainConfig c;
  c.model = small_config();
  c.steps = 0;
  c.max_dim = 4;
  c.max_context = 30;
  c.validation_tasks = 0;
  const auto r = meta_train(c);
  CHECK(r.model.weights() == PfnModel::initialize(c.model, derive_seed(c.seed, 0)).weights());
  CHECK(r.log.empty());
}

TEST_CASE("short training lowers the loss and logs every step") {
  MetaTrainConfig c;
  c.model = small_config();
  c.steps = 60;
  c.batch_size = 4;
  c.max_dim = 2;
  c.min_context = 10;
  c.max_context = 30;
  c.queries = 16;
  c.warmup_steps = 10;
  c.learning_rate = 3e-3;
  c.validation_tasks = 32;
  c.validation_every = 30;
  const auto r = meta_train(c);
  REQUIRE(r.log.size() == 60);
  CHECK(std::isfinite(r.log[29].validation_nll));
  CHECK(std::isfinite(r.log.back().validation_nll));
  CHECK(r.model.provenance().task_count == 240);
  std::ostringstream out;
  write_training_log(out, r.log);
  CHECK(out.str().rfind("step,train_nll,validation_nll\n", 0) == 0);
}

TEST_CASE("meta-train configuration validation") {
  MetaTrainConfig c;
  c.max_dim = 61;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = MetaTrainConfig{};
  c.max_context = 5000;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = MetaTrainConfig{};
  c.model.n_heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
