#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wordimp/corpus.hpp"
#include "wordimp/evaluation.hpp"
#include "wordimp/features.hpp"
#include "wordimp/nn/model.hpp"

namespace wordimp {

/// Runs fn(0..n-1) on up to `jobs` threads. The first exception thrown by
/// any call is rethrown after all workers finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// An utterance with its raw features and gold labels.
struct Example {
  std::string utterance_id;
  std::vector<WordTiming> words;
  RawUtteranceFeatures raw;
  std::vector<Label> gold;
};

/// Loads audio and extracts raw features for every utterance. Failures name
/// the utterance and are rethrown as DataError.
std::vector<Example> extract_examples(const std::vector<LabeledUtterance>& corpus,
                                      const AssemblyConfig& cfg, int jobs = 1);

std::vector<RawUtteranceFeatures> raw_features(const std::vector<Example>& examples);

/// Selected model-input columns of one utterance, before scaling.
UtteranceInput select_features(const std::vector<WordFeatures>& words, const FeatureSelection& sel);

/// Per-column standardization of model inputs, fitted on training data.
/// Columns with std < 1e-8 are only centered.
struct InputScaler {
  Eigen::VectorXd window_mean, window_scale;
  Eigen::VectorXd lexical_mean, lexical_scale;

  static InputScaler fit(const std::vector<UtteranceInput>& inputs, int window_dim,
                         int lexical_dim);
  UtteranceInput apply(UtteranceInput in) const;
};

/// Everything needed to label a new utterance: feature configuration,
/// speaker statistics, input scaling and the network.
struct ImportanceModel {
  AssemblyConfig assembly;
  FeatureSelection selection;
  SpeakerStats stats;
  InputScaler scaler;
  SequenceLabeler labeler;

  UtteranceInput prepare(const RawUtteranceFeatures& raw) const;
  std::vector<Label> predict(const RawUtteranceFeatures& raw) const;
};

std::vector<std::vector<Label>> predict_all(const ImportanceModel& model,
                                            const std::vector<Example>& examples, int jobs = 1);

Metrics evaluate(const ImportanceModel& model, const std::vector<Example>& examples, int jobs = 1);

std::vector<Label> gold_labels(const LabeledUtterance& utt);

}  // namespace wordimp
