#include "wordimp/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "wordimp/errors.hpp"

namespace wordimp {

Label bin_score(double score) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw DataError("importance score " + std::to_string(score) + " outside [0, 1]");
  }
  if (score < 0.3) return Label::LI;
  if (score < 0.6) return Label::MI;
  return Label::HI;
}

Metrics metrics_from_confusion(const ConfusionMatrix& cm) {
  Metrics m;
  m.confusion = cm;
  m.n_words = static_cast<std::size_t>(cm.total());
  if (m.n_words == 0) throw DataError("metrics: no evaluated words");
  const double n = static_cast<double>(m.n_words);

  long correct = 0;
  double sq = 0.0;
  for (int g = 0; g < kNumLabels; ++g) {
    for (int p = 0; p < kNumLabels; ++p) {
      const long c = cm.counts(g, p);
      if (g == p) correct += c;
      sq += static_cast<double>(c) * static_cast<double>((p - g) * (p - g));
    }
  }
  double f1_sum = 0.0;
  for (int k = 0; k < kNumLabels; ++k) {
    const long tp = cm.counts(k, k);
    const long gold_k = cm.counts.row(k).sum();
    const long pred_k = cm.counts.col(k).sum();
    if (gold_k == 0 && pred_k == 0) {
      m.absent_classes.push_back(label_from_ord(k));
      continue;
    }
    f1_sum += 2.0 * static_cast<double>(tp) / static_cast<double>(gold_k + pred_k);
  }
  m.acc = 100.0 * static_cast<double>(correct) / n;
  m.macro_f1 = 100.0 * f1_sum / kNumLabels;
  m.rms = 100.0 * std::sqrt(sq / n);
  return m;
}

Metrics metrics(std::span<const Label> gold, std::span<const Label> pred) {
  if (gold.size() != pred.size()) {
    throw DataError("metrics: " + std::to_string(gold.size()) + " gold vs " +
                    std::to_string(pred.size()) + " predicted labels");
  }
  if (gold.empty()) throw DataError("metrics: empty input");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gold.size(); ++i) cm.add(gold[i], pred[i]);
  return metrics_from_confusion(cm);
}

nlohmann::json to_json(const Metrics& m) {
  nlohmann::json confusion = nlohmann::json::array();
  for (int g = 0; g < kNumLabels; ++g) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < kNumLabels; ++p) row.push_back(m.confusion.counts(g, p));
    confusion.push_back(row);
  }
  nlohmann::json absent = nlohmann::json::array();
  for (Label l : m.absent_classes) absent.push_back(std::string(to_string(l)));
  nlohmann::json j = {{"acc", m.acc},           {"macro_f1", m.macro_f1},
                      {"rms", m.rms},           {"confusion", confusion},
                      {"n_words", m.n_words},   {"absent_classes", absent}};
  if (m.wer) j["wer"] = *m.wer;
  return j;
}

std::vector<AlignmentOp> align_hypothesis(std::span<const std::string> ref,
                                          std::span<const std::string> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = d[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      d[i][j] = std::min({sub, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }

  std::vector<AlignmentOp> ops;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && d[i][j] == d[i - 1][j - 1]) {
      ops.push_back({EditKind::Match, i - 1, j - 1});
      --i, --j;
    } else if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + 1) {
      ops.push_back({EditKind::Substitution, i - 1, j - 1});
      --i, --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ops.push_back({EditKind::Deletion, i - 1, std::nullopt});
      --i;
    } else {
      ops.push_back({EditKind::Insertion, std::nullopt, j - 1});
      --j;
    }
  }
  std::reverse(ops.begin(), ops.end());
  return ops;
}

std::size_t edit_cost(std::span<const AlignmentOp> alignment) {
  return static_cast<std::size_t>(std::count_if(alignment.begin(), alignment.end(), [](const AlignmentOp& op) {
    return op.kind != EditKind::Match;
  }));
}

std::size_t reference_length(std::span<const AlignmentOp> alignment) {
  return static_cast<std::size_t>(std::count_if(alignment.begin(), alignment.end(),
                                                [](const AlignmentOp& op) { return op.ref.has_value(); }));
}

double wer(std::span<const AlignmentOp> alignment) {
  const std::size_t n_ref = reference_length(alignment);
  if (n_ref == 0) throw DataError("wer: empty reference");
  return static_cast<double>(edit_cost(alignment)) / static_cast<double>(n_ref);
}

LabelPairs project_labels(std::span<const AlignmentOp> alignment, std::span<const Label> gold_ref,
                          std::span<const Label> pred_hyp, bool include_insertions) {
  LabelPairs out;
  auto check = [](std::optional<std::size_t> idx, std::size_t size, const char* side) {
    if (!idx || *idx >= size) {
      throw DataError(std::string("project_labels: alignment inconsistent with ") + side + " labels");
    }
    return *idx;
  };
  for (const AlignmentOp& op : alignment) {
    switch (op.kind) {
      case EditKind::Match:
      case EditKind::Substitution:
        out.gold.push_back(gold_ref[check(op.ref, gold_ref.size(), "reference")]);
        out.pred.push_back(pred_hyp[check(op.hyp, pred_hyp.size(), "hypothesis")]);
        break;
      case EditKind::Insertion: {
        const std::size_t h = check(op.hyp, pred_hyp.size(), "hypothesis");
        if (include_insertions) {
          out.gold.push_back(Label::LI);
          out.pred.push_back(pred_hyp[h]);
        }
        break;
      }
      case EditKind::Deletion:
        out.gold.push_back(gold_ref[check(op.ref, gold_ref.size(), "reference")]);
        out.pred.push_back(Label::LI);
        break;
    }
  }
  return out;
}

}  // namespace wordimp
