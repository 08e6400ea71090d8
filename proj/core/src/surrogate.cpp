#include "ymca/surrogate.hpp"

namespace ymca {

std::vector<Prediction> Posterior::predict(const Eigen::Ref<const Eigen::MatrixXd>& queries) const {
  Eigen::VectorXd mean, stddev;
  predict(queries, mean, stddev);
  std::vector<Prediction> out(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = {mean[i], stddev[i]};
  }
  return out;
}

std::vector<Prediction> predict(const Surrogate& surrogate,
                                const Eigen::Ref<const Eigen::MatrixXd>& context_z,
                                const Eigen::Ref<const Eigen::VectorXd>& context_y,
                                const Eigen::Ref<const Eigen::MatrixXd>& queries) {
  return surrogate.condition(context_z, context_y)->predict(queries);
}

}  // namespace ymca
