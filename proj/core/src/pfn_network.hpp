#pragma once

// Transformer encoder used by the in-context surrogate, with a hand-written
// backward pass. Templated on the scalar so gradient checks can run in
// double while training and inference run in float.
//
// Token layout: the first n rows are context tokens (features + target),
// the remaining m rows are query tokens (features only). Every token
// attends to the context tokens; nothing attends to queries.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ymca/pfn.hpp"

namespace ymca::detail {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

struct Slot {
  std::size_t offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

struct LayerSlots {
  Slot ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
};

struct Layout {
  Slot wx, bx, wy, by;
  std::vector<LayerSlots> layers;
  Slot lnf_g, lnf_b, wh1, bh1, wh2, bh2;
  std::size_t total = 0;

  explicit Layout(const PfnConfig& c) {
    auto add = [this](Eigen::Index r, Eigen::Index k) {
      Slot s{total, r, k};
      total += static_cast<std::size_t>(r * k);
      return s;
    };
    const Eigen::Index d = c.d_model, f = c.max_features, ff = c.d_ff;
    wx = add(2 * f, d);
    bx = add(1, d);
    wy = add(1, d);
    by = add(1, d);
    for (int l = 0; l < c.n_layers; ++l) {
      LayerSlots s;
      s.ln1_g = add(1, d);
      s.ln1_b = add(1, d);
      s.wq = add(d, d);
      s.bq = add(1, d);
      s.wk = add(d, d);
      s.bk = add(1, d);
      s.wv = add(d, d);
      s.bv = add(1, d);
      s.wo = add(d, d);
      s.bo = add(1, d);
      s.ln2_g = add(1, d);
      s.ln2_b = add(1, d);
      s.w1 = add(d, ff);
      s.b1 = add(1, ff);
      s.w2 = add(ff, d);
      s.b2 = add(1, d);
      layers.push_back(s);
    }
    lnf_g = add(1, d);
    lnf_b = add(1, d);
    wh1 = add(d, ff);
    bh1 = add(1, ff);
    wh2 = add(ff, 2);
    bh2 = add(1, 2);
  }
};

template <typename T>
Eigen::Map<Mat<T>> view(std::vector<T>& buf, const Slot& s) {
  return Eigen::Map<Mat<T>>(buf.data() + s.offset, s.rows, s.cols);
}
template <typename T>
Eigen::Map<const Mat<T>> view(const std::vector<T>& buf, const Slot& s) {
  return Eigen::Map<const Mat<T>>(buf.data() + s.offset, s.rows, s.cols);
}
template <typename T>
Eigen::Map<RowVec<T>> row(std::vector<T>& buf, const Slot& s) {
  return Eigen::Map<RowVec<T>>(buf.data() + s.offset, s.cols);
}
template <typename T>
Eigen::Map<const RowVec<T>> row(const std::vector<T>& buf, const Slot& s) {
  return Eigen::Map<const RowVec<T>>(buf.data() + s.offset, s.cols);
}

inline constexpr double kLnEps = 1e-5;
inline constexpr double kSigmaFloor = 1e-3;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// tanh-approximated GELU, vectorized over a whole matrix.
template <typename T>
Mat<T> gelu(const Mat<T>& u) {
  const T c = T(0.7978845608028654);
  const auto a = u.array();
  return (T(0.5) * a * (T(1) + (c * (a + T(0.044715) * a.cube())).tanh())).matrix();
}

template <typename T>
Mat<T> gelu_grad(const Mat<T>& u) {
  const T c = T(0.7978845608028654);
  const auto a = u.array();
  const auto t = (c * (a + T(0.044715) * a.cube())).tanh().eval();
  return (T(0.5) * (T(1) + t) + T(0.5) * a * (T(1) - t.square()) * c * (T(1) + T(3 * 0.044715) * a.square()))
      .matrix();
}

template <typename T>
T softplus(T r) {
  return r > T(20) ? r : std::log1p(std::exp(r));
}

template <typename T>
T sigmoid(T r) {
  return T(1) / (T(1) + std::exp(-r));
}

/// Row-wise layer norm. Stores normalized rows and reciprocal std for backward.
template <typename T>
void layer_norm(const Mat<T>& x, const Eigen::Map<const RowVec<T>>& g,
                const Eigen::Map<const RowVec<T>>& b, Mat<T>& out, Mat<T>* xhat,
                ColVec<T>* rstd) {
  const Eigen::Index n = x.rows(), d = x.cols();
  out.resize(n, d);
  if (xhat) xhat->resize(n, d);
  if (rstd) rstd->resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mu = x.row(i).mean();
    const T var = (x.row(i).array() - mu).square().mean();
    const T r = T(1) / std::sqrt(var + T(kLnEps));
    RowVec<T> h = (x.row(i).array() - mu) * r;
    out.row(i) = h.cwiseProduct(g) + b;
    if (xhat) xhat->row(i) = h;
    if (rstd) (*rstd)[i] = r;
  }
}

template <typename T>
void layer_norm_backward(const Mat<T>& dout, const Mat<T>& xhat, const ColVec<T>& rstd,
                         const Eigen::Map<const RowVec<T>>& g, Eigen::Map<RowVec<T>> dg,
                         Eigen::Map<RowVec<T>> db, Mat<T>& dx) {
  const Eigen::Index n = dout.rows(), d = dout.cols();
  dx.resize(n, d);
  dg += dout.cwiseProduct(xhat).colwise().sum();
  db += dout.colwise().sum();
  for (Eigen::Index i = 0; i < n; ++i) {
    RowVec<T> dh = dout.row(i).cwiseProduct(g);
    const T m1 = dh.mean();
    const T m2 = dh.cwiseProduct(xhat.row(i)).mean();
    dx.row(i) = (dh.array() - m1 - xhat.row(i).array() * m2) * rstd[i];
  }
}

/// In-place row softmax.
template <typename T>
void softmax_rows(Mat<T>& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const T m = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - m).exp();
    s.row(i) /= s.row(i).sum();
  }
}

/// Preprocessed task: scaled, padded features and standardized targets.
template <typename T>
struct NetInput {
  Mat<T> features;      // (n + m) x 2F : padded values then presence mask
  ColVec<T> context_y;  // n standardized targets
  Eigen::Index n_ctx = 0;
};

template <typename T>
struct LayerCache {
  Mat<T> h_in, a, xhat1, q, k, v, o, h_mid, bn, xhat2, u, g;
  ColVec<T> rstd1, rstd2;
  std::vector<Mat<T>> p;
};

template <typename T>
struct ForwardCache {
  Mat<T> h0;
  std::vector<LayerCache<T>> layers;
  Mat<T> hq, fhat, xhatf, t1, g1, out;
  ColVec<T> rstdf;
};

/// Network bound to a parameter buffer.
template <typename T>
class Network {
 public:
  Network(const PfnConfig& config, const Layout& layout) : c_(config), L_(layout) {}

  /// Token embeddings for all rows.
  void embed(const std::vector<T>& w, const NetInput<T>& in, Mat<T>& h) const {
    h.noalias() = in.features * view(w, L_.wx);
    h.rowwise() += row(w, L_.bx);
    const Eigen::Index n = in.n_ctx;
    h.topRows(n).noalias() += in.context_y * row(w, L_.wy);
    h.topRows(n).rowwise() += row(w, L_.by);
  }

  /// Full forward over context and query rows, recording what backward needs.
  /// Returns per-query (mean, raw scale) in `cache.out`.
  void forward(const std::vector<T>& w, const NetInput<T>& in, ForwardCache<T>& cache) const {
    const Eigen::Index n = in.n_ctx;
    const Eigen::Index total = in.features.rows();
    const Eigen::Index m = total - n;
    const int heads = c_.n_heads;
    const Eigen::Index dk = c_.d_model / heads;
    const T scale = T(1) / std::sqrt(T(dk));

    embed(w, in, cache.h0);
    cache.layers.resize(static_cast<std::size_t>(c_.n_layers));
    Mat<T> h = cache.h0;
    for (int l = 0; l < c_.n_layers; ++l) {
      const LayerSlots& s = L_.layers[static_cast<std::size_t>(l)];
      LayerCache<T>& lc = cache.layers[static_cast<std::size_t>(l)];
      lc.h_in = h;
      layer_norm<T>(h, row(w, s.ln1_g), row(w, s.ln1_b), lc.a, &lc.xhat1, &lc.rstd1);
      lc.q.noalias() = lc.a * view(w, s.wq);
      lc.q.rowwise() += row(w, s.bq);
      lc.k.noalias() = lc.a.topRows(n) * view(w, s.wk);
      lc.k.rowwise() += row(w, s.bk);
      lc.v.noalias() = lc.a.topRows(n) * view(w, s.wv);
      lc.v.rowwise() += row(w, s.bv);
      lc.o.resize(total, c_.d_model);
      lc.p.resize(static_cast<std::size_t>(heads));
      for (int hd = 0; hd < heads; ++hd) {
        Mat<T>& p = lc.p[static_cast<std::size_t>(hd)];
        p.noalias() = lc.q.middleCols(hd * dk, dk) * lc.k.middleCols(hd * dk, dk).transpose();
        p *= scale;
        softmax_rows(p);
        lc.o.middleCols(hd * dk, dk).noalias() = p * lc.v.middleCols(hd * dk, dk);
      }
      h.noalias() += lc.o * view(w, s.wo);
      h.rowwise() += row(w, s.bo);
      lc.h_mid = h;
      layer_norm<T>(h, row(w, s.ln2_g), row(w, s.ln2_b), lc.bn, &lc.xhat2, &lc.rstd2);
      lc.u.noalias() = lc.bn * view(w, s.w1);
      lc.u.rowwise() += row(w, s.b1);
      lc.g = gelu(lc.u);
      h.noalias() += lc.g * view(w, s.w2);
      h.rowwise() += row(w, s.b2);
    }
    cache.hq = h.bottomRows(m);
    head_forward(w, cache);
  }

  /// Mean NLL over queries in standardized units; accumulates gradients
  /// (scaled by `weight`) into `grad`.
  T loss_and_grad(const std::vector<T>& w, const NetInput<T>& in, const ColVec<T>& query_y,
                  ForwardCache<T>& cache, std::vector<T>& grad, T weight) const {
    forward(w, in, cache);
    const Eigen::Index m = query_y.size();
    Mat<T> dout(m, 2);
    T loss = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const T mu = cache.out(i, 0);
      const T r = cache.out(i, 1);
      const T sigma = softplus(r) + T(kSigmaFloor);
      const T resid = query_y[i] - mu;
      loss += std::log(sigma) + resid * resid / (T(2) * sigma * sigma) + T(kLogSqrt2Pi);
      const T dsigma = T(1) / sigma - resid * resid / (sigma * sigma * sigma);
      dout(i, 0) = -resid / (sigma * sigma);
      dout(i, 1) = dsigma * sigmoid(r);
    }
    loss /= T(m);
    dout *= weight / T(m);
    backward(w, in, cache, dout, grad);
    return loss;
  }

  void backward(const std::vector<T>& w, const NetInput<T>& in, const ForwardCache<T>& cache,
                const Mat<T>& dout, std::vector<T>& grad) const {
    const Eigen::Index n = in.n_ctx;
    const Eigen::Index total = in.features.rows();
    const Eigen::Index m = total - n;
    const int heads = c_.n_heads;
    const Eigen::Index dk = c_.d_model / heads;
    const T scale = T(1) / std::sqrt(T(dk));

    // Head.
    view(grad, L_.wh2).noalias() += cache.g1.transpose() * dout;
    row(grad, L_.bh2) += dout.colwise().sum();
    Mat<T> dg1 = dout * view(w, L_.wh2).transpose();
    Mat<T> dt1 = dg1.cwiseProduct(gelu_grad(cache.t1));
    view(grad, L_.wh1).noalias() += cache.fhat.transpose() * dt1;
    row(grad, L_.bh1) += dt1.colwise().sum();
    Mat<T> dfhat = dt1 * view(w, L_.wh1).transpose();
    Mat<T> dhq;
    layer_norm_backward<T>(dfhat, cache.xhatf, cache.rstdf, row(w, L_.lnf_g), row(grad, L_.lnf_g),
                           row(grad, L_.lnf_b), dhq);

    Mat<T> dh = Mat<T>::Zero(total, c_.d_model);
    dh.bottomRows(m) = dhq;

    Mat<T> dgl, du, dbn, dx, dq, dk_all, dv_all, da, dp, ds;
    for (int l = c_.n_layers - 1; l >= 0; --l) {
      const LayerSlots& s = L_.layers[static_cast<std::size_t>(l)];
      const LayerCache<T>& lc = cache.layers[static_cast<std::size_t>(l)];
      // FFN residual branch.
      view(grad, s.w2).noalias() += lc.g.transpose() * dh;
      row(grad, s.b2) += dh.colwise().sum();
      dgl.noalias() = dh * view(w, s.w2).transpose();
      du = dgl.cwiseProduct(gelu_grad(lc.u));
      view(grad, s.w1).noalias() += lc.bn.transpose() * du;
      row(grad, s.b1) += du.colwise().sum();
      dbn.noalias() = du * view(w, s.w1).transpose();
      layer_norm_backward<T>(dbn, lc.xhat2, lc.rstd2, row(w, s.ln2_g), row(grad, s.ln2_g),
                             row(grad, s.ln2_b), dx);
      dh += dx;

      // Attention residual branch.
      view(grad, s.wo).noalias() += lc.o.transpose() * dh;
      row(grad, s.bo) += dh.colwise().sum();
      const Mat<T> d_o = dh * view(w, s.wo).transpose();
      dq.resize(total, c_.d_model);
      dk_all.resize(n, c_.d_model);
      dv_all.resize(n, c_.d_model);
      for (int hd = 0; hd < heads; ++hd) {
        const Mat<T>& p = lc.p[static_cast<std::size_t>(hd)];
        const auto doh = d_o.middleCols(hd * dk, dk);
        dp.noalias() = doh * lc.v.middleCols(hd * dk, dk).transpose();
        dv_all.middleCols(hd * dk, dk).noalias() = p.transpose() * doh;
        const ColVec<T> rs = p.cwiseProduct(dp).rowwise().sum();
        ds = (p.array() * (dp.array().colwise() - rs.array())).matrix() * scale;
        dq.middleCols(hd * dk, dk).noalias() = ds * lc.k.middleCols(hd * dk, dk);
        dk_all.middleCols(hd * dk, dk).noalias() = ds.transpose() * lc.q.middleCols(hd * dk, dk);
      }
      view(grad, s.wq).noalias() += lc.a.transpose() * dq;
      row(grad, s.bq) += dq.colwise().sum();
      view(grad, s.wk).noalias() += lc.a.topRows(n).transpose() * dk_all;
      row(grad, s.bk) += dk_all.colwise().sum();
      view(grad, s.wv).noalias() += lc.a.topRows(n).transpose() * dv_all;
      row(grad, s.bv) += dv_all.colwise().sum();
      da.noalias() = dq * view(w, s.wq).transpose();
      da.topRows(n).noalias() += dk_all * view(w, s.wk).transpose();
      da.topRows(n).noalias() += dv_all * view(w, s.wv).transpose();
      layer_norm_backward<T>(da, lc.xhat1, lc.rstd1, row(w, s.ln1_g), row(grad, s.ln1_g),
                             row(grad, s.ln1_b), dx);
      dh += dx;
    }

    // Embedding.
    view(grad, L_.wx).noalias() += in.features.transpose() * dh;
    row(grad, L_.bx) += dh.colwise().sum();
    row(grad, L_.wy).noalias() += in.context_y.transpose() * dh.topRows(n);
    row(grad, L_.by) += dh.topRows(n).colwise().sum();
  }

  /// Per-layer keys and values of an encoded context, for query-only passes.
  struct ContextState {
    std::vector<Mat<T>> k, v;
    Eigen::Index n = 0;
  };

  void encode_context(const std::vector<T>& w, const NetInput<T>& ctx, ContextState& st) const {
    const Eigen::Index n = ctx.n_ctx;
    st.n = n;
    st.k.resize(static_cast<std::size_t>(c_.n_layers));
    st.v.resize(static_cast<std::size_t>(c_.n_layers));
    Mat<T> h;
    embed(w, ctx, h);
    Mat<T> a;
    for (int l = 0; l < c_.n_layers; ++l) {
      const LayerSlots& s = L_.layers[static_cast<std::size_t>(l)];
      layer_norm<T>(h, row(w, s.ln1_g), row(w, s.ln1_b), a, nullptr, nullptr);
      Mat<T>& k = st.k[static_cast<std::size_t>(l)];
      Mat<T>& v = st.v[static_cast<std::size_t>(l)];
      k.noalias() = a * view(w, s.wk);
      k.rowwise() += row(w, s.bk);
      v.noalias() = a * view(w, s.wv);
      v.rowwise() += row(w, s.bv);
      if (l + 1 == c_.n_layers) break;  // context tokens past the last K/V are unused
      attend_and_ffn(w, s, a, k, v, h, nullptr);
    }
  }

  /// Query-only pass against an encoded context. `features` holds padded
  /// query features (m x 2F). Optionally returns last-layer attention
  /// weights averaged over heads (m x n).
  void predict_queries(const std::vector<T>& w, const ContextState& st, const Mat<T>& features,
                       Mat<T>& out, Mat<T>* last_attention = nullptr) const {
    Mat<T> h = features * view(w, L_.wx);
    h.rowwise() += row(w, L_.bx);
    Mat<T> a;
    for (int l = 0; l < c_.n_layers; ++l) {
      const LayerSlots& s = L_.layers[static_cast<std::size_t>(l)];
      layer_norm<T>(h, row(w, s.ln1_g), row(w, s.ln1_b), a, nullptr, nullptr);
      const bool last = l + 1 == c_.n_layers;
      attend_and_ffn(w, s, a, st.k[static_cast<std::size_t>(l)], st.v[static_cast<std::size_t>(l)],
                     h, last ? last_attention : nullptr);
    }
    ForwardCache<T> fc;
    fc.hq = std::move(h);
    head_forward(w, fc);
    out = std::move(fc.out);
  }

 private:
  void head_forward(const std::vector<T>& w, ForwardCache<T>& cache) const {
    layer_norm<T>(cache.hq, row(w, L_.lnf_g), row(w, L_.lnf_b), cache.fhat, &cache.xhatf,
                  &cache.rstdf);
    cache.t1.noalias() = cache.fhat * view(w, L_.wh1);
    cache.t1.rowwise() += row(w, L_.bh1);
    cache.g1 = gelu(cache.t1);
    cache.out.noalias() = cache.g1 * view(w, L_.wh2);
    cache.out.rowwise() += row(w, L_.bh2);
  }

  /// h <- h + Attn(a; k, v); h <- h + FFN(LN2(h)).
  void attend_and_ffn(const std::vector<T>& w, const LayerSlots& s, const Mat<T>& a,
                      const Mat<T>& k, const Mat<T>& v, Mat<T>& h, Mat<T>* mean_attention) const {
    const int heads = c_.n_heads;
    const Eigen::Index dk = c_.d_model / heads;
    const T scale = T(1) / std::sqrt(T(dk));
    Mat<T> q = a * view(w, s.wq);
    q.rowwise() += row(w, s.bq);
    Mat<T> o(a.rows(), c_.d_model);
    Mat<T> p;
    if (mean_attention) *mean_attention = Mat<T>::Zero(a.rows(), k.rows());
    for (int hd = 0; hd < heads; ++hd) {
      p.noalias() = q.middleCols(hd * dk, dk) * k.middleCols(hd * dk, dk).transpose();
      p *= scale;
      softmax_rows(p);
      o.middleCols(hd * dk, dk).noalias() = p * v.middleCols(hd * dk, dk);
      if (mean_attention) *mean_attention += p / T(heads);
    }
    h.noalias() += o * view(w, s.wo);
    h.rowwise() += row(w, s.bo);
    Mat<T> bn;
    layer_norm<T>(h, row(w, s.ln2_g), row(w, s.ln2_b), bn, nullptr, nullptr);
    Mat<T> u = bn * view(w, s.w1);
    u.rowwise() += row(w, s.b1);
    u = gelu(u);
    h.noalias() += u * view(w, s.w2);
    h.rowwise() += row(w, s.b2);
  }

  PfnConfig c_;
  const Layout& L_;
};

}  // namespace ymca::detail
