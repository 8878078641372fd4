#include "wordimp/nn/adam.hpp"

#include <cmath>
#include <string>

#include "wordimp/errors.hpp"

namespace wordimp {

void adam_update(Eigen::MatrixXd& value, const Eigen::MatrixXd& grad, Eigen::MatrixXd& m,
                 Eigen::MatrixXd& v, long t, const AdamConfig& cfg) {
  if (grad.rows() != value.rows() || grad.cols() != value.cols() || m.rows() != value.rows() ||
      m.cols() != value.cols() || v.rows() != value.rows() || v.cols() != value.cols()) {
    throw InternalError("adam_update: shape mismatch");
  }
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  value.array() -= cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
}

void adam_step(ModelParameters& params, AdamState& state, const AdamConfig& cfg) {
  if (state.m.empty()) {
    params.for_each([&](const Param& p) {
      state.m.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
      state.v.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
    });
  }
  std::size_t n = 0;
  params.for_each([&](const Param&) { ++n; });
  if (state.m.size() != n || state.v.size() != n) {
    throw InternalError("adam_step: optimizer state has " + std::to_string(state.m.size()) +
                        " tensors, model has " + std::to_string(n));
  }
  ++state.step;
  std::size_t i = 0;
  params.for_each([&](Param& p) {
    adam_update(p.value, p.grad, state.m[i], state.v[i], state.step, cfg);
    ++i;
  });
}

double clip_gradients(ModelParameters& params, double max_norm) {
  double sq = 0.0;
  params.for_each([&](const Param& p) { sq += p.grad.squaredNorm(); });
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    params.for_each([&](Param& p) { p.grad *= scale; });
  }
  return norm;
}

}  // namespace wordimp
