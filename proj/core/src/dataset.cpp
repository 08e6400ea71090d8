#include "ymca/dataset.hpp"

#include <ostream>

#include "ymca/error.hpp"
#include "ymca/format.hpp"

namespace ymca {

void Dataset::append(const Eigen::Ref<const Eigen::MatrixXd>& rows,
                     std::span<const std::size_t> corners,
                     const Eigen::Ref<const Eigen::VectorXd>& ys) {
  if (static_cast<std::size_t>(rows.rows()) != corners.size() || rows.rows() != ys.size()) {
    throw ShapeError("Dataset::append: row, corner and target counts differ");
  }
  if (!empty() && rows.rows() > 0 && rows.cols() != x.cols()) {
    throw ShapeError("Dataset::append: dimension mismatch");
  }
  const Eigen::Index n0 = x.rows();
  const Eigen::Index n = rows.rows();
  Eigen::MatrixXd nx(n0 + n, rows.cols());
  if (n0 > 0) nx.topRows(n0) = x;
  nx.bottomRows(n) = rows;
  x = std::move(nx);
  Eigen::VectorXd ny(n0 + n);
  if (n0 > 0) ny.head(n0) = y;
  ny.tail(n) = ys;
  y = std::move(ny);
  corner.insert(corner.end(), corners.begin(), corners.end());
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  out.corner.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    out.x.row(static_cast<Eigen::Index>(i)) = x.row(r);
    out.y[static_cast<Eigen::Index>(i)] = y[r];
    out.corner.push_back(corner[rows[i]]);
  }
  return out;
}

std::vector<std::size_t> Dataset::rows_of(std::size_t k) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < corner.size(); ++i) {
    if (corner[i] == k) rows.push_back(i);
  }
  return rows;
}

namespace {

void check_subset(std::span<const Eigen::Index> subset, Eigen::Index d) {
  for (const Eigen::Index j : subset) {
    if (j < 0 || j >= d) throw ShapeError("feature index out of range");
  }
}

}  // namespace

Eigen::MatrixXd joint_inputs(const Dataset& data, std::span<const Eigen::Index> subset,
                             const std::vector<CornerSpec>& corners) {
  check_subset(subset, data.dimension());
  const auto s = static_cast<Eigen::Index>(subset.size());
  const Eigen::Index p = corners.empty() ? 0 : corners.front().encoding.size();
  Eigen::MatrixXd z(static_cast<Eigen::Index>(data.size()), s + p);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < s; ++j) z(i, j) = data.x(i, subset[static_cast<std::size_t>(j)]);
    const std::size_t k = data.corner[static_cast<std::size_t>(i)];
    if (k >= corners.size()) throw LookupError("dataset row references an unknown corner");
    z.row(i).tail(p) = corners[k].encoding.transpose();
  }
  return z;
}

Eigen::MatrixXd joint_inputs(const Eigen::Ref<const Eigen::MatrixXd>& x,
                             std::span<const Eigen::Index> subset, const CornerSpec& corner) {
  check_subset(subset, x.cols());
  const auto s = static_cast<Eigen::Index>(subset.size());
  const Eigen::Index p = corner.encoding.size();
  Eigen::MatrixXd z(x.rows(), s + p);
  for (Eigen::Index j = 0; j < s; ++j) z.col(j) = x.col(subset[static_cast<std::size_t>(j)]);
  z.rightCols(p).rowwise() = corner.encoding.transpose();
  return z;
}

Eigen::MatrixXd full_feature_matrix(const Dataset& data, const std::vector<CornerSpec>& corners) {
  const Eigen::Index d = data.dimension();
  const Eigen::Index p = corners.empty() ? 0 : corners.front().encoding.size();
  Eigen::MatrixXd z(static_cast<Eigen::Index>(data.size()), d + p);
  if (d > 0) z.leftCols(d) = data.x;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    z.row(i).tail(p) = corners.at(data.corner[static_cast<std::size_t>(i)]).encoding.transpose();
  }
  return z;
}

void write_dataset_csv(std::ostream& out, const Dataset& data,
                       const std::vector<CornerSpec>& corners) {
  const Eigen::Index d = data.dimension();
  const Eigen::Index p = corners.empty() ? 0 : corners.front().encoding.size();
  for (Eigen::Index j = 0; j < d; ++j) out << "x_" << (j + 1) << ',';
  out << "corner_id";
  for (Eigen::Index j = 0; j < p; ++j) out << ",corner_enc_" << (j + 1);
  out << ",y\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < d; ++j) out << format_double(data.x(r, j)) << ',';
    const CornerSpec& c = corners.at(data.corner[i]);
    out << c.id;
    for (Eigen::Index j = 0; j < p; ++j) out << ',' << format_double(c.encoding[j]);
    out << ',' << format_double(data.y[r]) << '\n';
  }
}

}  // namespace ymca
