#pragma once

#include <Eigen/Core>

#include "wordimp/nn/param.hpp"

namespace wordimp {

// Inputs and states are column-per-timestep. A trace records what the
// backward pass needs; pass nullptr for inference.

struct GruTrace {
  Eigen::MatrixXd x;  // D x n
  Eigen::MatrixXd h;  // H x (n+1), column 0 is the zero initial state
  Eigen::MatrixXd z, r, n;
};

/// Runs a GRU over the columns of `x` (in the given order) and returns the
/// final hidden state.
Eigen::VectorXd gru_forward(const ModelParameters::Recurrent& p, const Eigen::MatrixXd& x,
                            GruTrace* trace = nullptr);

/// Accumulates parameter gradients given dL/dh_final. Returns dL/dx (D x n).
Eigen::MatrixXd gru_backward(ModelParameters::Recurrent& p, const GruTrace& trace,
                             const Eigen::VectorXd& d_final);

struct LstmTrace {
  Eigen::MatrixXd x;  // D x T
  Eigen::MatrixXd h;  // H x (T+1)
  Eigen::MatrixXd c;  // H x (T+1)
  Eigen::MatrixXd i, f, g, o;
};

/// Runs an LSTM over the columns of `x` and returns all hidden states (H x T).
Eigen::MatrixXd lstm_forward(const ModelParameters::Recurrent& p, const Eigen::MatrixXd& x,
                             LstmTrace* trace = nullptr);

/// Accumulates parameter gradients given dL/dh_t for every step. Returns dL/dx.
Eigen::MatrixXd lstm_backward(ModelParameters::Recurrent& p, const LstmTrace& trace,
                              const Eigen::MatrixXd& d_hidden);

/// Bidirectional LSTM over word vectors: column t is [h_fwd_t ; h_bwd_t].
Eigen::MatrixXd bilstm_forward(const ModelParameters& p, const Eigen::MatrixXd& x,
                               LstmTrace* fwd = nullptr, LstmTrace* bwd = nullptr);

/// Column-reversal helper used for the backward direction.
Eigen::MatrixXd reverse_columns(const Eigen::MatrixXd& m);

}  // namespace wordimp
