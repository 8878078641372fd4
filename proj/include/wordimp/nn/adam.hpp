#pragma once

#include <vector>

#include <Eigen/Core>

#include "wordimp/nn/param.hpp"

namespace wordimp {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Eigen::MatrixXd> m, v;
  long step = 0;
};

/// One bias-corrected Adam update of a single tensor. `t` is the 1-based step.
void adam_update(Eigen::MatrixXd& value, const Eigen::MatrixXd& grad, Eigen::MatrixXd& m,
                 Eigen::MatrixXd& v, long t, const AdamConfig& cfg);

/// Updates every tensor of `params` from its gradient buffer. Lazily sizes
/// an empty state; throws InternalError when a non-empty state has the wrong shape.
void adam_step(ModelParameters& params, AdamState& state, const AdamConfig& cfg = {});

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_gradients(ModelParameters& params, double max_norm);

}  // namespace wordimp
