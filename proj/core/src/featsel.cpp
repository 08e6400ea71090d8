#include "ymca/featsel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "ymca/error.hpp"
#include "ymca/gbdt.hpp"
#include "ymca/stats.hpp"

namespace ymca {

double r2_score(const Eigen::Ref<const Eigen::VectorXd>& predictions,
                const Eigen::Ref<const Eigen::VectorXd>& truths) {
  if (truths.size() == 0 || predictions.size() != truths.size()) {
    throw ShapeError("r2_score needs equal nonempty prediction and truth vectors");
  }
  const double m = truths.mean();
  const double sst = (truths.array() - m).square().sum();
  if (!(sst > 0.0)) throw DomainError("r2_score undefined: truths have zero variance");
  const double sse = (predictions - truths).squaredNorm();
  return 1.0 - sse / sst;
}

std::vector<Eigen::Index> FeatureSelection::subset() const {
  std::vector<Eigen::Index> s = selected;
  std::sort(s.begin(), s.end());
  return s;
}

namespace {

Eigen::MatrixXd take_columns(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& cols,
                             const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x(static_cast<Eigen::Index>(rows[r]), cols[c]);
    }
  }
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& y, const std::vector<std::size_t>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Eigen::Index>(r)] = y[static_cast<Eigen::Index>(rows[r])];
  return out;
}

}  // namespace

FeatureSelection select_features(const Dataset& data, const std::vector<CornerSpec>& corners,
                                 std::uint64_t seed, const SelectionLimits& limits) {
  if (limits.batch == 0) throw ConfigError("selection batch must be positive");
  const Eigen::Index d = data.dimension();
  const Eigen::Index p = corners.empty() ? 0 : corners.front().encoding.size();
  const std::size_t total = static_cast<std::size_t>(d + p);

  FeatureSelection sel;
  sel.split_seed = seed;
  for (Eigen::Index j = d; j < d + p; ++j) sel.forced.push_back(j);

  if (total <= limits.batch) {
    sel.ranking.resize(static_cast<std::size_t>(d));
    std::iota(sel.ranking.begin(), sel.ranking.end(), Eigen::Index{0});
    sel.selected = sel.ranking;
    sel.importances = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
    sel.best_k = 1;
    sel.curve.push_back({1, total, sel.r2});
    return sel;
  }

  // Seeded split, stratified by corner.
  Rng rng(seed);
  std::vector<std::size_t> train, valid;
  for (std::size_t k = 0; k < corners.size(); ++k) {
    std::vector<std::size_t> rows = data.rows_of(k);
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n_valid = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(rows.size())));
    valid.insert(valid.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_valid));
    train.insert(train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_valid), rows.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(valid.begin(), valid.end());
  sel.train_rows = train.size();
  sel.validation_rows = valid.size();
  if (valid.size() < 5) throw InsufficientDataError("feature selection needs at least 5 validation points");

  const Eigen::MatrixXd features = full_feature_matrix(data, corners);
  // The ranking model sees every row, validation included.
  const GbdtModel ranker = train_gbdt(features, data.y);
  sel.importances = ranker.importances();
  sel.ranking = rank_features(sel.importances.head(d));

  const Eigen::VectorXd y_train = take(data.y, train);
  const Eigen::VectorXd y_valid = take(data.y, valid);
  const std::size_t k_max = total / limits.batch;
  struct Candidate {
    std::size_t k, take_n, width;
    double r2 = 0.0;
  };
  std::vector<Candidate> cands;
  for (std::size_t k = 1; k <= k_max; ++k) {
    const std::size_t take_n = std::min<std::size_t>(k * limits.batch, static_cast<std::size_t>(d));
    const std::size_t width = take_n + static_cast<std::size_t>(p);
    if (width > limits.max_width && k > 1) break;
    cands.push_back({k, take_n, width});
    if (take_n == static_cast<std::size_t>(d)) break;
  }

  // Candidates are independent fits; workers take them widest first and
  // write by index, so the result does not depend on the thread count.
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cands.size();) {
      Candidate& c = cands[cands.size() - 1 - i];
      std::vector<Eigen::Index> cols(sel.ranking.begin(), sel.ranking.begin() + static_cast<std::ptrdiff_t>(c.take_n));
      cols.insert(cols.end(), sel.forced.begin(), sel.forced.end());
      const GbdtModel model = train_gbdt(take_columns(features, cols, train), y_train);
      c.r2 = r2_score(model.predict(take_columns(features, cols, valid)), y_valid);
    }
  };
  const std::size_t threads = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), cands.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
  }

  double best = -std::numeric_limits<double>::infinity();
  for (const Candidate& c : cands) {
    sel.curve.push_back({c.k, c.width, c.r2});
    if (c.r2 > best) {
      best = c.r2;
      sel.best_k = c.k;
      sel.r2 = c.r2;
      sel.selected.assign(sel.ranking.begin(), sel.ranking.begin() + static_cast<std::ptrdiff_t>(c.take_n));
    }
  }
  return sel;
}

std::string selection_report_json(const FeatureSelection& selection) {
  nlohmann::ordered_json j;
  auto one_based = [](const std::vector<Eigen::Index>& v) {
    std::vector<Eigen::Index> out;
    out.reserve(v.size());
    for (Eigen::Index i : v) out.push_back(i + 1);
    return out;
  };
  j["split_seed"] = selection.split_seed;
  j["train_rows"] = selection.train_rows;
  j["validation_rows"] = selection.validation_rows;
  j["ranking"] = one_based(selection.ranking);
  std::vector<double> imp(selection.importances.data(),
                          selection.importances.data() + selection.importances.size());
  j["importances"] = imp;
  nlohmann::ordered_json curve = nlohmann::ordered_json::array();
  for (const auto& c : selection.curve) {
    nlohmann::ordered_json row;
    row["k"] = c.k;
    row["width"] = c.width;
    if (std::isfinite(c.r2)) row["r2"] = c.r2; else row["r2"] = nullptr;
    curve.push_back(row);
  }
  j["curve"] = curve;
  j["best_k"] = selection.best_k;
  if (std::isfinite(selection.r2)) j["r2"] = selection.r2; else j["r2"] = nullptr;
  j["selected"] = one_based(selection.subset());
  j["forced"] = one_based(selection.forced);
  j["ranking_sees_validation"] = true;
  return j.dump(2) + "\n";
}

}  // namespace ymca
