#include "ymca/pfn.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "pfn_network.hpp"
#include "pfn_preprocess.hpp"
#include "ymca/error.hpp"
#include "ymca/stats.hpp"

namespace ymca {

using detail::Layout;
using detail::Mat;
using detail::Network;

namespace {

constexpr char kMagic[8] = {'Y', 'M', 'C', 'A', 'P', 'F', 'N', '\0'};
constexpr Eigen::Index kQueryChunk = 2048;

void check_context(const PfnConfig& c, const Eigen::Ref<const Eigen::MatrixXd>& z,
                   const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (z.rows() != y.size()) throw ShapeError("context inputs and targets differ in length");
  if (z.rows() == 0) throw ShapeError("context must not be empty");
  if (z.rows() > c.max_context) {
    throw CapacityError("context of " + std::to_string(z.rows()) + " points exceeds the model's " +
                        std::to_string(c.max_context) + "-point limit; subsample the context");
  }
  if (z.cols() < 1) throw ShapeError("inputs need at least one feature");
  if (z.cols() > c.max_features) {
    throw CapacityError("input width " + std::to_string(z.cols()) + " exceeds the model's " +
                        std::to_string(c.max_features) +
                        "-feature limit; run feature selection first");
  }
}

class PfnPosterior final : public Posterior {
 public:
  PfnPosterior(std::shared_ptr<const PfnModel> model, const Eigen::Ref<const Eigen::MatrixXd>& z,
               const Eigen::Ref<const Eigen::VectorXd>& y)
      : model_(std::move(model)), layout_(model_->config()), dim_(z.cols()) {
    const PfnConfig& c = model_->config();
    check_context(c, z, y);
    scaling_ = detail::fit_scaling(z, y);
    detail::NetInput<float> in;
    in.features = detail::scaled_features<float>(scaling_, z, c.max_features);
    in.context_y = detail::standardized_targets<float>(scaling_, y);
    in.n_ctx = z.rows();
    Network<float>(c, layout_).encode_context(model_->weights(), in, state_);
  }

  Eigen::Index dimension() const override { return dim_; }

  void predict(const Eigen::Ref<const Eigen::MatrixXd>& queries, Eigen::VectorXd& mean,
               Eigen::VectorXd& stddev) const override {
    if (queries.rows() > 0 && queries.cols() != dim_) {
      throw ShapeError("query width " + std::to_string(queries.cols()) +
                       " does not match context width " + std::to_string(dim_));
    }
    const PfnConfig& c = model_->config();
    Network<float> net(c, layout_);
    mean.resize(queries.rows());
    stddev.resize(queries.rows());
    Mat<float> out;
    for (Eigen::Index start = 0; start < queries.rows(); start += kQueryChunk) {
      const Eigen::Index n = std::min(kQueryChunk, queries.rows() - start);
      const Mat<float> f =
          detail::scaled_features<float>(scaling_, queries.middleRows(start, n), c.max_features);
      net.predict_queries(model_->weights(), state_, f, out);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = out(i, 0);
        const double sd = detail::softplus<double>(out(i, 1)) + detail::kSigmaFloor;
        mean[start + i] = scaling_.y_mean + scaling_.y_scale * mu;
        stddev[start + i] = scaling_.y_scale * sd;
      }
    }
  }

  Eigen::VectorXd last_layer_attention(const Eigen::Ref<const Eigen::VectorXd>& query) const {
    const PfnConfig& c = model_->config();
    Network<float> net(c, layout_);
    const Eigen::MatrixXd q = query.transpose();
    const Mat<float> f = detail::scaled_features<float>(scaling_, q, c.max_features);
    Mat<float> out, att;
    net.predict_queries(model_->weights(), state_, f, out, &att);
    return att.row(0).transpose().cast<double>();
  }

 private:
  std::shared_ptr<const PfnModel> model_;
  Layout layout_;
  Eigen::Index dim_;
  detail::ContextScaling scaling_;
  Network<float>::ContextState state_;
};

// Borrows a model owned by the caller for the duration of a call.
std::shared_ptr<const PfnModel> borrow(const PfnModel& model) {
  return std::shared_ptr<const PfnModel>(&model, [](const PfnModel*) {});
}

}  // namespace

void PfnConfig::validate() const {
  if (d_model < 1 || n_heads < 1 || n_layers < 1 || d_ff < 1 || max_features < 1 ||
      max_context < 1) {
    throw ConfigError("PFN sizes must be positive");
  }
  if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
}

PfnModel::PfnModel(const PfnConfig& config, std::vector<float> weights, PfnProvenance provenance)
    : config_(config), weights_(std::move(weights)), provenance_(provenance) {
  config_.validate();
  if (weights_.size() != Layout(config_).total) {
    throw ShapeError("weight count does not match the architecture");
  }
}

PfnModel PfnModel::initialize(const PfnConfig& config, std::uint64_t seed) {
  config.validate();
  const Layout L(config);
  std::vector<float> w(L.total, 0.0f);
  Rng rng(seed);
  std::normal_distribution<float> normal;
  auto fill = [&](const detail::Slot& s, float stddev) {
    for (Eigen::Index i = 0; i < s.rows * s.cols; ++i) w[s.offset + static_cast<std::size_t>(i)] = stddev * normal(rng);
  };
  auto ones = [&](const detail::Slot& s) {
    std::fill_n(w.begin() + static_cast<std::ptrdiff_t>(s.offset), s.cols, 1.0f);
  };
  const float residual = 1.0f / std::sqrt(2.0f * static_cast<float>(config.n_layers));
  fill(L.wx, 1.0f / std::sqrt(static_cast<float>(config.max_features)));
  fill(L.wy, 1.0f);
  for (const auto& s : L.layers) {
    ones(s.ln1_g);
    ones(s.ln2_g);
    const float in = 1.0f / std::sqrt(static_cast<float>(config.d_model));
    fill(s.wq, in);
    fill(s.wk, in);
    fill(s.wv, in);
    fill(s.wo, in * residual);
    fill(s.w1, in);
    fill(s.w2, residual / std::sqrt(static_cast<float>(config.d_ff)));
  }
  ones(L.lnf_g);
  fill(L.wh1, 1.0f / std::sqrt(static_cast<float>(config.d_model)));
  fill(L.wh2, 0.01f);
  // Initial predictive is N(0, 1) in standardized units: softplus(0.5413) = 1.
  w[L.bh2.offset + 1] = std::log(std::exp(1.0f - static_cast<float>(detail::kSigmaFloor)) - 1.0f);
  PfnProvenance prov;
  prov.seed = seed;
  return PfnModel(config, std::move(w), prov);
}

void PfnModel::save(std::ostream& out) const {
  nlohmann::json header = {
      {"format", "ymca-pfn-checkpoint"},
      {"version", kCheckpointVersion},
      {"architecture",
       {{"d_model", config_.d_model},
        {"n_heads", config_.n_heads},
        {"n_layers", config_.n_layers},
        {"d_ff", config_.d_ff},
        {"max_features", config_.max_features},
        {"max_context", config_.max_context}}},
      {"provenance",
       {{"seed", provenance_.seed},
        {"task_count", provenance_.task_count},
        {"steps", provenance_.steps},
        {"config_hash", provenance_.config_hash},
        {"final_nll", std::isfinite(provenance_.final_nll) ? nlohmann::json(provenance_.final_nll)
                                                           : nlohmann::json(nullptr)}}},
      {"parameter_count", weights_.size()},
      {"weight_encoding", "float32-le"},
  };
  const std::string text = header.dump();
  auto put_u64 = [&](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
  };
  out.write(kMagic, sizeof kMagic);
  const std::uint32_t version = kCheckpointVersion;
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((version >> (8 * i)) & 0xff));
  put_u64(text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_u64(weights_.size());
  for (const float f : weights_) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  if (!out) throw Error("failed to write PFN checkpoint");
}

void PfnModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  save(out);
}

PfnModel PfnModel::load(std::istream& in) {
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw SchemaError("not a PFN checkpoint");
  }
  auto get = [&](int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      const int c = in.get();
      if (c == EOF) throw SchemaError("truncated PFN checkpoint");
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
  };
  const auto version = static_cast<std::uint32_t>(get(4));
  if (version != kCheckpointVersion) {
    throw SchemaError("unsupported PFN checkpoint version " + std::to_string(version));
  }
  const auto len = get(8);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw SchemaError("truncated PFN checkpoint header");
  const auto header = nlohmann::json::parse(text);
  const auto& a = header.at("architecture");
  PfnConfig c;
  c.d_model = a.at("d_model");
  c.n_heads = a.at("n_heads");
  c.n_layers = a.at("n_layers");
  c.d_ff = a.at("d_ff");
  c.max_features = a.at("max_features");
  c.max_context = a.at("max_context");
  PfnProvenance prov;
  const auto& p = header.at("provenance");
  prov.seed = p.at("seed");
  prov.task_count = p.at("task_count");
  prov.steps = p.at("steps");
  if (!p.at("final_nll").is_null()) prov.final_nll = p.at("final_nll");
  prov.config_hash = p.value("config_hash", std::string{});
  const auto count = get(8);
  std::vector<float> w(count);
  for (auto& f : w) f = std::bit_cast<float>(static_cast<std::uint32_t>(get(4)));
  return PfnModel(c, std::move(w), prov);
}

PfnModel PfnModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  return load(in);
}

std::vector<Prediction> predict(const PfnModel& model,
                                const Eigen::Ref<const Eigen::MatrixXd>& context_z,
                                const Eigen::Ref<const Eigen::VectorXd>& context_y,
                                const Eigen::Ref<const Eigen::MatrixXd>& queries) {
  if (queries.rows() > 0 && queries.cols() != context_z.cols()) {
    throw ShapeError("query width does not match context width");
  }
  return PfnPosterior(borrow(model), context_z, context_y).Posterior::predict(queries);
}

double kish_effective_size(const Eigen::Ref<const Eigen::VectorXd>& weights) {
  const double ss = weights.squaredNorm();
  return ss > 0.0 ? 1.0 / ss : 0.0;
}

AttentionReport attention_weights(const PfnModel& model,
                                  const Eigen::Ref<const Eigen::MatrixXd>& context_z,
                                  const Eigen::Ref<const Eigen::VectorXd>& context_y,
                                  const Eigen::Ref<const Eigen::VectorXd>& query) {
  if (query.size() != context_z.cols()) throw ShapeError("query width does not match context width");
  const PfnPosterior post(borrow(model), context_z, context_y);
  AttentionReport r;
  r.weights = post.last_layer_attention(query);
  r.weights /= r.weights.sum();
  r.effective_sample_size = kish_effective_size(r.weights);
  return r;
}

PfnSurrogate::PfnSurrogate(std::shared_ptr<const PfnModel> model) : model_(std::move(model)) {
  if (!model_) throw ConfigError("PfnSurrogate requires a model");
}

std::size_t PfnSurrogate::max_context() const {
  return static_cast<std::size_t>(model_->config().max_context);
}

std::size_t PfnSurrogate::max_features() const {
  return static_cast<std::size_t>(model_->config().max_features);
}

std::unique_ptr<Posterior> PfnSurrogate::condition(const Eigen::Ref<const Eigen::MatrixXd>& z,
                                                   const Eigen::Ref<const Eigen::VectorXd>& y) const {
  return std::make_unique<PfnPosterior>(model_, z, y);
}

double gaussian_nll(double y, double mean, double stddev) {
  const double r = (y - mean) / stddev;
  return std::log(stddev) + 0.5 * r * r + detail::kLogSqrt2Pi;
}

}  // namespace ymca
