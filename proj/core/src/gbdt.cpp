#include "ymca/gbdt.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>

#include "ymca/error.hpp"

namespace ymca {
namespace {

// Per-feature quantile bins. thresholds[f][b] is the upper edge of bin b;
// the last bin is open-ended and has no threshold.
struct Binned {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<std::vector<double>> thresholds;
  std::vector<std::uint8_t> bins;  // column-major
  std::uint8_t at(Eigen::Index f, Eigen::Index i) const { return bins[f * rows + i]; }
  int bin_count(Eigen::Index f) const { return static_cast<int>(thresholds[f].size()) + 1; }
};

Binned make_bins(const Eigen::Ref<const Eigen::MatrixXd>& x, int max_bins) {
  Binned b;
  b.rows = x.rows();
  b.cols = x.cols();
  b.thresholds.resize(b.cols);
  b.bins.resize(static_cast<std::size_t>(b.rows * b.cols));
  std::vector<double> col(b.rows);
  for (Eigen::Index f = 0; f < b.cols; ++f) {
    for (Eigen::Index i = 0; i < b.rows; ++i) col[i] = x(i, f);
    std::sort(col.begin(), col.end());
    std::vector<double> uniq;
    std::vector<Eigen::Index> upto;  // rows <= uniq value
    for (Eigen::Index i = 0; i < b.rows; ++i) {
      if (uniq.empty() || col[i] != uniq.back()) {
        uniq.push_back(col[i]);
        upto.push_back(i + 1);
      } else {
        upto.back() = i + 1;
      }
    }
    auto& th = b.thresholds[f];
    if (static_cast<int>(uniq.size()) <= max_bins) {
      for (std::size_t u = 0; u + 1 < uniq.size(); ++u) th.push_back(0.5 * (uniq[u] + uniq[u + 1]));
    } else {
      // Equal-count edges placed between distinct values.
      const double per_bin = static_cast<double>(b.rows) / max_bins;
      double next = per_bin;
      for (std::size_t u = 0; u + 1 < uniq.size(); ++u) {
        if (static_cast<double>(upto[u]) >= next) {
          th.push_back(0.5 * (uniq[u] + uniq[u + 1]));
          while (next <= static_cast<double>(upto[u])) next += per_bin;
          if (static_cast<int>(th.size()) == max_bins - 1) break;
        }
      }
    }
    for (Eigen::Index i = 0; i < b.rows; ++i) {
      const auto it = std::lower_bound(th.begin(), th.end(), x(i, f));
      b.bins[f * b.rows + i] = static_cast<std::uint8_t>(it - th.begin());
    }
  }
  return b;
}

struct Histogram {
  std::vector<double> sum;  // cols * stride
  std::vector<int> count;
};

struct Split {
  double gain = 0.0;
  Eigen::Index feature = -1;
  int bin = -1;  // left side holds bins <= bin
};

struct Leaf {
  int node = 0;
  std::size_t begin = 0, end = 0;
  double sum = 0.0;
  Histogram hist;
  Split best;
};

class TreeBuilder {
 public:
  TreeBuilder(const Binned& data, const GbdtConfig& cfg, int stride)
      : data_(data), cfg_(cfg), stride_(stride), inverse_(static_cast<std::size_t>(data.rows) + 1, 0.0) {
    for (std::size_t n = 1; n < inverse_.size(); ++n) inverse_[n] = 1.0 / static_cast<double>(n);
  }

  GbdtModel::Tree build(const std::vector<double>& residual, std::vector<int>& order,
                        Eigen::VectorXd& importances, double gain_floor) {
    GbdtModel::Tree tree(1);
    std::vector<Leaf> leaves;
    Leaf root;
    root.begin = 0;
    root.end = order.size();
    root.sum = 0.0;
    for (int i : order) root.sum += residual[i];
    root.hist = build_hist(residual, order, root.begin, root.end);
    root.best = best_split(root);
    leaves.push_back(std::move(root));

    while (static_cast<int>(leaves.size()) < cfg_.max_leaves) {
      int pick = -1;
      for (std::size_t l = 0; l < leaves.size(); ++l) {
        if (leaves[l].best.feature >= 0 && leaves[l].best.gain > gain_floor &&
            (pick < 0 || leaves[l].best.gain > leaves[pick].best.gain)) {
          pick = static_cast<int>(l);
        }
      }
      if (pick < 0) break;
      Leaf parent = std::move(leaves[pick]);
      const Split sp = parent.best;
      importances[sp.feature] += sp.gain;

      const auto mid_it = std::stable_partition(
          order.begin() + static_cast<std::ptrdiff_t>(parent.begin),
          order.begin() + static_cast<std::ptrdiff_t>(parent.end),
          [&](int i) { return data_.at(sp.feature, i) <= sp.bin; });
      const std::size_t mid = static_cast<std::size_t>(mid_it - order.begin());

      Leaf left, right;
      left.begin = parent.begin;
      left.end = mid;
      right.begin = mid;
      right.end = parent.end;
      for (std::size_t j = left.begin; j < left.end; ++j) left.sum += residual[order[j]];
      right.sum = parent.sum - left.sum;
      Leaf& small = (left.end - left.begin) <= (right.end - right.begin) ? left : right;
      Leaf& large = (&small == &left) ? right : left;
      // Leaves too small to split never need a histogram.
      if (splittable(small)) {
        small.hist = build_hist(residual, order, small.begin, small.end);
        large.hist = std::move(parent.hist);
        for (std::size_t j = 0; j < large.hist.sum.size(); ++j) {
          large.hist.sum[j] -= small.hist.sum[j];
          large.hist.count[j] -= small.hist.count[j];
        }
      } else if (splittable(large)) {
        large.hist = build_hist(residual, order, large.begin, large.end);
      }
      if (splittable(left)) left.best = best_split(left);
      if (splittable(right)) right.best = best_split(right);

      auto& node = tree[parent.node];
      node.feature = static_cast<int>(sp.feature);
      node.threshold = data_.thresholds[sp.feature][sp.bin];
      node.left = static_cast<int>(tree.size());
      node.right = node.left + 1;
      left.node = node.left;
      right.node = node.right;
      tree.emplace_back();
      tree.emplace_back();
      leaves[pick] = std::move(left);
      leaves.push_back(std::move(right));
    }
    for (const Leaf& l : leaves) {
      const double n = static_cast<double>(l.end - l.begin);
      tree[l.node].value = cfg_.learning_rate * l.sum / n;
    }
    return tree;
  }

 private:
  Histogram build_hist(const std::vector<double>& residual, const std::vector<int>& order,
                       std::size_t begin, std::size_t end) const {
    Histogram h;
    h.sum.assign(static_cast<std::size_t>(data_.cols * stride_), 0.0);
    h.count.assign(h.sum.size(), 0);
    // residuals gathered once so the per-column pass reads them contiguously
    std::vector<double> r(end - begin);
    for (std::size_t j = begin; j < end; ++j) r[j - begin] = residual[order[j]];
    for (Eigen::Index f = 0; f < data_.cols; ++f) {
      if (data_.thresholds[f].empty()) continue;
      const std::uint8_t* col = data_.bins.data() + f * data_.rows;
      double* s = h.sum.data() + f * stride_;
      int* c = h.count.data() + f * stride_;
      for (std::size_t j = begin; j < end; ++j) {
        const std::uint8_t b = col[order[j]];
        s[b] += r[j - begin];
        ++c[b];
      }
    }
    return h;
  }

  bool splittable(const Leaf& leaf) const {
    return static_cast<int>(leaf.end - leaf.begin) >= 2 * cfg_.min_leaf_samples;
  }

  Split best_split(const Leaf& leaf) const {
    Split best;
    const int n = static_cast<int>(leaf.end - leaf.begin);
    if (n < 2 * cfg_.min_leaf_samples) return best;
    const double parent = leaf.sum * leaf.sum / n;
    for (Eigen::Index f = 0; f < data_.cols; ++f) {
      const int nb = data_.bin_count(f);
      if (nb < 2) continue;
      const double* s = leaf.hist.sum.data() + f * stride_;
      const int* c = leaf.hist.count.data() + f * stride_;
      double sl = 0.0;
      int cl = 0;
      for (int b = 0; b + 1 < nb; ++b) {
        // Empty bins repeat the previous split's gain and lose the strict comparison,
        // so they need no special case; the min-leaf test selects instead of branching.
        sl += s[b];
        cl += c[b];
        const int cr = n - cl;
        const double sr = leaf.sum - sl;
        const bool ok = cl >= cfg_.min_leaf_samples && cr >= cfg_.min_leaf_samples;
        const double gain = ok ? sl * sl * inverse_[cl] + sr * sr * inverse_[cr] - parent : 0.0;
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = f;
          best.bin = b;
        }
      }
    }
    return best;
  }

  const Binned& data_;
  const GbdtConfig& cfg_;
  int stride_;
  std::vector<double> inverse_;  // 1 / n, replaces divisions in the split scan
};

double tree_output(const GbdtModel::Tree& tree, const Eigen::Ref<const Eigen::MatrixXd>& x,
                   Eigen::Index row) {
  int n = 0;
  while (tree[n].feature >= 0) {
    n = x(row, tree[n].feature) <= tree[n].threshold ? tree[n].left : tree[n].right;
  }
  return tree[n].value;
}

}  // namespace

Eigen::VectorXd GbdtModel::predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  if (x.cols() != features_) throw ShapeError("GBDT input width does not match the model");
  Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), base_);
  for (const Tree& t : trees_) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] += tree_output(t, x, i);
  }
  return out;
}

GbdtModel train_gbdt(const Eigen::Ref<const Eigen::MatrixXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& y, const GbdtConfig& config) {
  if (x.rows() != y.size()) throw ShapeError("GBDT features and targets differ in length");
  if (x.rows() < 20) throw InsufficientDataError("GBDT training needs at least 20 samples");
  if (config.max_bins < 2 || config.max_bins > 256) throw ConfigError("GBDT max_bins must be in [2, 256]");
  const Eigen::Index n = x.rows();
  const double base = y.mean();
  Eigen::VectorXd importances = Eigen::VectorXd::Zero(x.cols());
  std::vector<GbdtModel::Tree> trees;
  if (y.maxCoeff() == y.minCoeff()) return GbdtModel(x.cols(), base, {}, importances);

  const Binned data = make_bins(x, config.max_bins);
  TreeBuilder builder(data, config, config.max_bins);
  std::vector<double> residual(n);
  for (Eigen::Index i = 0; i < n; ++i) residual[i] = y[i] - base;
  const double total = std::inner_product(residual.begin(), residual.end(), residual.begin(), 0.0);
  const double gain_floor = 1e-12 * total;
  std::vector<int> order(n);
  for (int t = 0; t < config.trees; ++t) {
    std::iota(order.begin(), order.end(), 0);
    GbdtModel::Tree tree = builder.build(residual, order, importances, gain_floor);
    if (tree.size() == 1) break;  // no further split improves the fit
    for (Eigen::Index i = 0; i < n; ++i) residual[i] -= tree_output(tree, x, i);
    trees.push_back(std::move(tree));
  }
  return GbdtModel(x.cols(), base, std::move(trees), std::move(importances));
}

std::vector<Eigen::Index> rank_features(const Eigen::Ref<const Eigen::VectorXd>& importances) {
  std::vector<Eigen::Index> idx(importances.size());
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return importances[a] > importances[b]; });
  return idx;
}

std::vector<Eigen::Index> rank_features(const GbdtModel& model) {
  return rank_features(model.importances());
}

}  // namespace ymca
