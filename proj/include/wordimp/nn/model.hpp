#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "wordimp/nn/heads.hpp"
#include "wordimp/nn/param.hpp"

namespace wordimp {

/// Model-ready input of one dialogue turn: per word a (windows x window_dim)
/// matrix, plus a (lexical_dim x T) matrix of lexical vectors.
struct UtteranceInput {
  std::vector<Eigen::MatrixXd> windows;
  Eigen::MatrixXd lexical;

  std::size_t size() const { return windows.size(); }
};

/// Per-utterance loss for one head given its T x L outputs (logits for
/// softmax/ordinal, emissions for the CRF). Writes dL/d(outputs) when `grad`
/// is non-null. Throws DataError on a length mismatch.
double head_loss(HeadKind head, const Eigen::MatrixXd& outputs, std::span<const Label> gold,
                 const CrfWeights<double>& crf, Eigen::MatrixXd* grad = nullptr,
                 CrfWeights<double>* crf_grad = nullptr);

/// Decoded labels for one utterance's T x L outputs.
std::vector<Label> head_decode(HeadKind head, const Eigen::MatrixXd& outputs,
                               const CrfWeights<double>& crf);

/// bi-GRU word encoder -> BiLSTM context encoder -> projection head.
class SequenceLabeler {
 public:
  explicit SequenceLabeler(const ModelConfig& cfg);
  SequenceLabeler(const ModelConfig& cfg, ModelParameters params);

  const ModelConfig& config() const { return cfg_; }
  ModelParameters& params() { return params_; }
  const ModelParameters& params() const { return params_; }

  /// 2*gru_hidden word vector from a (windows x window_dim) matrix.
  Eigen::VectorXd encode_word(const Eigen::MatrixXd& windows) const;
  /// word_dim x T matrix of word vectors with lexical features appended.
  Eigen::MatrixXd word_vectors(const UtteranceInput& in) const;
  /// context_dim x T contextual states.
  Eigen::MatrixXd context(const UtteranceInput& in) const;
  /// T x L head outputs.
  Eigen::MatrixXd outputs(const UtteranceInput& in) const;

  std::vector<Label> predict(const UtteranceInput& in) const;
  double loss(const UtteranceInput& in, std::span<const Label> gold) const;

  /// Forward + reverse pass; adds weight * dLoss/dParam into the gradient
  /// buffers and returns the unweighted loss.
  double accumulate_gradient(const UtteranceInput& in, std::span<const Label> gold,
                             double weight = 1.0);

  CrfWeights<double> crf_weights() const;

 private:
  void check_input(const UtteranceInput& in) const;

  ModelConfig cfg_;
  ModelParameters params_;
};

}  // namespace wordimp
