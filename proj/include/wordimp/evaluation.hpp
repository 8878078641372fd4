#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "wordimp/nn/param.hpp"

namespace wordimp {

/// [0, 0.3) -> LI, [0.3, 0.6) -> MI, [0.6, 1] -> HI. Throws DataError outside [0, 1].
Label bin_score(double score);

/// Rows are gold labels, columns predictions.
struct ConfusionMatrix {
  Eigen::Matrix<long, kNumLabels, kNumLabels> counts =
      Eigen::Matrix<long, kNumLabels, kNumLabels>::Zero();

  void add(Label gold, Label pred) { ++counts(ord(gold), ord(pred)); }
  long total() const { return counts.sum(); }
};

/// ACC, macro-F1 and ordinal RMS, each scaled by 100.
struct Metrics {
  double acc = 0.0;
  double macro_f1 = 0.0;
  double rms = 0.0;
  ConfusionMatrix confusion;
  std::size_t n_words = 0;
  // Classes absent from both gold and predictions (scored F1 = 0).
  std::vector<Label> absent_classes;
  std::optional<double> wer;
};

Metrics metrics_from_confusion(const ConfusionMatrix& cm);
/// Throws DataError on empty or mismatched input.
Metrics metrics(std::span<const Label> gold, std::span<const Label> pred);

nlohmann::json to_json(const Metrics& m);

enum class EditKind { Match, Substitution, Insertion, Deletion };

struct AlignmentOp {
  EditKind kind;
  std::optional<std::size_t> ref;
  std::optional<std::size_t> hyp;
};

/// Unit-cost minimum edit alignment. Traceback prefers match, then
/// substitution, deletion, insertion.
std::vector<AlignmentOp> align_hypothesis(std::span<const std::string> ref,
                                          std::span<const std::string> hyp);

/// Substitutions + insertions + deletions.
std::size_t edit_cost(std::span<const AlignmentOp> alignment);
std::size_t reference_length(std::span<const AlignmentOp> alignment);

/// (S + I + D) / N_ref. Throws DataError when the reference is empty.
double wer(std::span<const AlignmentOp> alignment);

struct LabelPairs {
  std::vector<Label> gold, pred;
};

/// Pairs gold labels on the reference with predictions on the hypothesis.
/// Insertions pair gold LI with the hypothesis prediction; deletions pair the
/// reference gold with LI. Throws DataError when indices disagree with the
/// label lists.
LabelPairs project_labels(std::span<const AlignmentOp> alignment, std::span<const Label> gold_ref,
                          std::span<const Label> pred_hyp, bool include_insertions = true);

}  // namespace wordimp
