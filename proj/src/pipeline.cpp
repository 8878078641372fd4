#include "wordimp/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "wordimp/errors.hpp"

namespace wordimp {

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<Label> gold_labels(const LabeledUtterance& utt) {
  std::vector<Label> out;
  out.reserve(utt.scores.size());
  for (double s : utt.scores) out.push_back(bin_score(s));
  return out;
}

std::vector<Example> extract_examples(const std::vector<LabeledUtterance>& corpus,
                                      const AssemblyConfig& cfg, int jobs) {
  std::vector<Example> out(corpus.size());
  parallel_for(corpus.size(), jobs, [&](std::size_t i) {
    const LabeledUtterance& utt = corpus[i];
    try {
      const AudioBuffer audio = load_wav(utt.audio_path);
      out[i].utterance_id = utt.utterance_id;
      out[i].words = utt.words;
      out[i].raw = extract_raw_utterance(audio, utt.words, utt.speaker_id, cfg);
      out[i].gold = gold_labels(utt);
    } catch (const DataError& e) {
      throw DataError("utterance " + utt.utterance_id + ": " + e.what());
    }
  });
  return out;
}

std::vector<RawUtteranceFeatures> raw_features(const std::vector<Example>& examples) {
  std::vector<RawUtteranceFeatures> out;
  out.reserve(examples.size());
  for (const Example& e : examples) out.push_back(e.raw);
  return out;
}

UtteranceInput select_features(const std::vector<WordFeatures>& words, const FeatureSelection& sel) {
  UtteranceInput in;
  in.lexical.resize(static_cast<Eigen::Index>(sel.lexical.size()), static_cast<Eigen::Index>(words.size()));
  for (std::size_t t = 0; t < words.size(); ++t) {
    const Eigen::MatrixXd& win = words[t].subword.windows;
    Eigen::MatrixXd picked(win.rows(), static_cast<Eigen::Index>(sel.window.size()));
    for (std::size_t c = 0; c < sel.window.size(); ++c) {
      picked.col(static_cast<Eigen::Index>(c)) = win.col(sel.window[c]);
    }
    in.windows.push_back(std::move(picked));
    for (std::size_t c = 0; c < sel.lexical.size(); ++c) {
      in.lexical(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) =
          words[t].lexical.vector[sel.lexical[c]];
    }
  }
  return in;
}

InputScaler InputScaler::fit(const std::vector<UtteranceInput>& inputs, int window_dim,
                             int lexical_dim) {
  Eigen::VectorXd wsum = Eigen::VectorXd::Zero(window_dim), wsq = wsum;
  Eigen::VectorXd lsum = Eigen::VectorXd::Zero(lexical_dim), lsq = lsum;
  double wn = 0, ln = 0;
  for (const UtteranceInput& in : inputs) {
    for (const Eigen::MatrixXd& w : in.windows) {
      wsum += w.colwise().sum().transpose();
      wn += static_cast<double>(w.rows());
    }
    lsum += in.lexical.rowwise().sum();
    ln += static_cast<double>(in.lexical.cols());
  }
  InputScaler s;
  s.window_mean = wn > 0 ? Eigen::VectorXd(wsum / wn) : wsum;
  s.lexical_mean = ln > 0 ? Eigen::VectorXd(lsum / ln) : lsum;
  for (const UtteranceInput& in : inputs) {
    for (const Eigen::MatrixXd& w : in.windows) {
      wsq += (w.rowwise() - s.window_mean.transpose()).colwise().squaredNorm().transpose();
    }
    lsq += (in.lexical.colwise() - s.lexical_mean).rowwise().squaredNorm();
  }
  auto scale = [](const Eigen::VectorXd& sq, double n) {
    Eigen::VectorXd sd = n > 0 ? Eigen::VectorXd((sq / n).cwiseSqrt()) : Eigen::VectorXd::Ones(sq.size());
    return Eigen::VectorXd(sd.unaryExpr([](double v) { return v < 1e-8 ? 1.0 : v; }));
  };
  s.window_scale = scale(wsq, wn);
  s.lexical_scale = scale(lsq, ln);
  return s;
}

UtteranceInput InputScaler::apply(UtteranceInput in) const {
  for (Eigen::MatrixXd& w : in.windows) {
    w = ((w.rowwise() - window_mean.transpose()).array().rowwise() / window_scale.transpose().array()).matrix();
  }
  in.lexical = ((in.lexical.colwise() - lexical_mean).array().colwise() / lexical_scale.array()).matrix();
  return in;
}

UtteranceInput ImportanceModel::prepare(const RawUtteranceFeatures& raw) const {
  return scaler.apply(select_features(augment_utterance(raw, stats), selection));
}

std::vector<Label> ImportanceModel::predict(const RawUtteranceFeatures& raw) const {
  if (raw.words.empty()) return {};
  return labeler.predict(prepare(raw));
}

std::vector<std::vector<Label>> predict_all(const ImportanceModel& model,
                                            const std::vector<Example>& examples, int jobs) {
  std::vector<std::vector<Label>> out(examples.size());
  parallel_for(examples.size(), jobs, [&](std::size_t i) { out[i] = model.predict(examples[i].raw); });
  return out;
}

Metrics evaluate(const ImportanceModel& model, const std::vector<Example>& examples, int jobs) {
  const auto preds = predict_all(model, examples, jobs);
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    for (std::size_t t = 0; t < preds[i].size(); ++t) cm.add(examples[i].gold[t], preds[i][t]);
  }
  return metrics_from_confusion(cm);
}

}  // namespace wordimp
