#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "wordimp/nn/param.hpp"

// Projection-head math: normalizations, ordinal scanning, and the linear-chain
// CRF. Emission matrices are T x L (one row per word).

namespace wordimp {

/// Row-wise softmax.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> softmax_rows(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat shifted = logits.colwise() - logits.rowwise().maxCoeff();
  Mat e = shifted.array().exp().matrix();
  return (e.array().colwise() / e.rowwise().sum().array()).matrix();
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) / (Scalar(1) + (-logits.array()).exp())).matrix();
}

/// log(sum(exp(v))) without overflow.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.derived().array() - m).exp().sum());
}

/// Cumulative encoding: label l switches on components 0..l.
Eigen::VectorXd ordinal_targets(Label label, int num_labels = kNumLabels);

/// Scans scores from the lowest label upward and stops at the first score
/// below `threshold`; returns the last label reached. Falls back to the
/// lowest label when the first score is already below threshold.
template <typename Derived>
int ordinal_decode_index(const Eigen::MatrixBase<Derived>& scores, double threshold = 0.5) {
  int last = 0;
  for (Eigen::Index k = 0; k < scores.size(); ++k) {
    if (scores[k] < threshold) break;
    last = static_cast<int>(k);
  }
  return last;
}

Label ordinal_decode(const Eigen::Ref<const Eigen::VectorXd>& scores, double threshold = 0.5);

/// Linear-chain CRF parameters: transitions(i, j) scores label i followed by j.
template <typename Scalar>
struct CrfWeights {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> transitions;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> start;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> end;
};

template <typename Derived, typename Scalar = typename Derived::Scalar>
Scalar crf_path_score(const Eigen::MatrixBase<Derived>& emissions, const CrfWeights<Scalar>& w,
                      const std::vector<int>& path) {
  const Eigen::Index steps = emissions.rows();
  Scalar s = w.start[path[0]] + w.end[path[static_cast<std::size_t>(steps - 1)]];
  for (Eigen::Index t = 0; t < steps; ++t) {
    const int y = path[static_cast<std::size_t>(t)];
    s += emissions(t, y);
    if (t > 0) s += w.transitions(path[static_cast<std::size_t>(t - 1)], y);
  }
  return s;
}

/// Forward-algorithm log partition, log-space throughout.
template <typename Derived, typename Scalar = typename Derived::Scalar>
Scalar crf_log_partition(const Eigen::MatrixBase<Derived>& emissions,
                         const CrfWeights<Scalar>& w) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index steps = emissions.rows();
  const Eigen::Index labels = emissions.cols();
  Vec alpha = w.start + emissions.row(0).transpose();
  Vec next(labels);
  for (Eigen::Index t = 1; t < steps; ++t) {
    for (Eigen::Index j = 0; j < labels; ++j) {
      next[j] = log_sum_exp(alpha + w.transitions.col(j)) + emissions(t, j);
    }
    alpha.swap(next);
  }
  return log_sum_exp(alpha + w.end);
}

/// Highest-scoring label path. Ties resolve toward the lower label index.
template <typename Derived, typename Scalar = typename Derived::Scalar>
std::vector<int> crf_viterbi(const Eigen::MatrixBase<Derived>& emissions,
                             const CrfWeights<Scalar>& w) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index steps = emissions.rows();
  const Eigen::Index labels = emissions.cols();
  Eigen::MatrixXi back(steps, labels);
  Vec delta = w.start + emissions.row(0).transpose();
  Vec next(labels);
  for (Eigen::Index t = 1; t < steps; ++t) {
    for (Eigen::Index j = 0; j < labels; ++j) {
      Eigen::Index best = 0;
      Scalar best_score = delta[0] + w.transitions(0, j);
      for (Eigen::Index i = 1; i < labels; ++i) {
        const Scalar s = delta[i] + w.transitions(i, j);
        if (s > best_score) {
          best_score = s;
          best = i;
        }
      }
      next[j] = best_score + emissions(t, j);
      back(t, j) = static_cast<int>(best);
    }
    delta.swap(next);
  }
  Eigen::Index last = 0;
  (delta + w.end).maxCoeff(&last);  // first maximum on ties
  std::vector<int> path(static_cast<std::size_t>(steps));
  path[static_cast<std::size_t>(steps - 1)] = static_cast<int>(last);
  for (Eigen::Index t = steps - 1; t > 0; --t) {
    path[static_cast<std::size_t>(t - 1)] = back(t, path[static_cast<std::size_t>(t)]);
  }
  return path;
}

/// Gradients of the log partition: per-step label marginals (T x L) and
/// expected transition counts, plus start/end marginals.
template <typename Scalar>
struct CrfMarginals {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> unary;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> pairwise;
  Scalar log_partition;
};

template <typename Derived, typename Scalar = typename Derived::Scalar>
CrfMarginals<Scalar> crf_marginals(const Eigen::MatrixBase<Derived>& emissions,
                                   const CrfWeights<Scalar>& w) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index steps = emissions.rows();
  const Eigen::Index labels = emissions.cols();
  Mat alpha(steps, labels), beta(steps, labels);
  alpha.row(0) = (w.start + emissions.row(0).transpose()).transpose();
  for (Eigen::Index t = 1; t < steps; ++t) {
    for (Eigen::Index j = 0; j < labels; ++j) {
      alpha(t, j) = log_sum_exp(alpha.row(t - 1).transpose() + w.transitions.col(j)) + emissions(t, j);
    }
  }
  beta.row(steps - 1) = w.end.transpose();
  for (Eigen::Index t = steps - 2; t >= 0; --t) {
    for (Eigen::Index i = 0; i < labels; ++i) {
      beta(t, i) = log_sum_exp(w.transitions.row(i).transpose() +
                               emissions.row(t + 1).transpose() + beta.row(t + 1).transpose());
    }
  }
  CrfMarginals<Scalar> m;
  m.log_partition = log_sum_exp(alpha.row(steps - 1).transpose() + w.end);
  m.unary = (alpha + beta).array().unaryExpr([&](Scalar v) { return std::exp(v - m.log_partition); });
  m.pairwise = Mat::Zero(labels, labels);
  for (Eigen::Index t = 0; t + 1 < steps; ++t) {
    for (Eigen::Index i = 0; i < labels; ++i) {
      for (Eigen::Index j = 0; j < labels; ++j) {
        m.pairwise(i, j) += std::exp(alpha(t, i) + w.transitions(i, j) + emissions(t + 1, j) +
                                     beta(t + 1, j) - m.log_partition);
      }
    }
  }
  return m;
}

}  // namespace wordimp
