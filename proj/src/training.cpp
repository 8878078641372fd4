#include "wordimp/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "wordimp/errors.hpp"

namespace wordimp {

void TrainConfig::validate() const {
  if (batch_max_turns < 1) throw ConfigError("batch size must be at least 1");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(assembly.tau_s > 0.0) || !(assembly.hop_s > 0.0) || assembly.hop_s > assembly.tau_s) {
    throw ConfigError("window settings need tau > 0 and 0 < hop <= tau");
  }
  if (features.window.empty()) throw ConfigError("feature selection leaves no window features");
}

nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"train_loss", r.train_loss},
          {"train_acc", r.train_acc},
          {"dev_acc", r.dev.acc},
          {"dev_macro_f1", r.dev.macro_f1},
          {"dev_rms", r.dev.rms},
          {"improved", r.improved}};
}

bool EarlyStopping::update(int epoch, double value) {
  if (value < best_) {
    best_ = value;
    best_epoch_ = epoch;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order,
                                                   int max_turns) {
  std::vector<std::vector<std::size_t>> batches;
  const auto step = static_cast<std::size_t>(std::max(1, max_turns));
  for (std::size_t i = 0; i < order.size(); i += step) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + step)));
  }
  return batches;
}

TrainResult train(const std::vector<Example>& train_set, const std::vector<Example>& dev_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty() || dev_set.empty()) throw DataError("training needs non-empty train and dev splits");

  const SpeakerStats stats = fit_speaker_stats(raw_features(train_set));
  auto select_all = [&](const std::vector<Example>& set) {
    std::vector<UtteranceInput> out;
    for (const Example& e : set) out.push_back(select_features(augment_utterance(e.raw, stats), cfg.features));
    return out;
  };
  std::vector<UtteranceInput> train_inputs = select_all(train_set);

  ModelConfig mc;
  mc.window_dim = static_cast<int>(cfg.features.window.size());
  mc.lexical_dim = static_cast<int>(cfg.features.lexical.size());
  mc.gru_hidden = cfg.gru_hidden;
  mc.lstm_hidden = cfg.lstm_hidden;
  mc.head = cfg.head;
  mc.seed = cfg.seed + kInitSeedOffset;

  const InputScaler scaler = InputScaler::fit(train_inputs, mc.window_dim, mc.lexical_dim);
  for (UtteranceInput& in : train_inputs) in = scaler.apply(std::move(in));

  TrainResult result{ImportanceModel{cfg.assembly, cfg.features, stats, scaler, SequenceLabeler(mc)},
                     0, {}, {}};
  for (const Example& e : train_set) result.fitted_on.push_back(e.utterance_id);

  ImportanceModel current = result.model;
  SequenceLabeler& net = current.labeler;
  AdamState adam;
  const AdamConfig adam_cfg{cfg.lr};
  std::mt19937_64 shuffle_rng(cfg.seed + kShuffleSeedOffset);
  EarlyStopping stopper(cfg.patience);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (const auto& batch : make_batches(order, cfg.batch_max_turns)) {
      net.params().zero_grad();
      const double weight = 1.0 / static_cast<double>(batch.size());
      for (std::size_t idx : batch) {
        loss_sum += net.accumulate_gradient(train_inputs[idx], train_set[idx].gold, weight);
      }
      net.params().check_finite();
      clip_gradients(net.params(), cfg.clip_norm);
      adam_step(net.params(), adam, adam_cfg);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    if (!std::isfinite(rec.train_loss)) {
      throw InternalError("training diverged at epoch " + std::to_string(epoch) + " (loss " +
                          std::to_string(rec.train_loss) + ")");
    }
    ConfusionMatrix train_cm;
    for (std::size_t i = 0; i < train_set.size(); ++i) {
      const std::vector<Label> pred = net.predict(train_inputs[i]);
      for (std::size_t t = 0; t < pred.size(); ++t) train_cm.add(train_set[i].gold[t], pred[t]);
    }
    rec.train_acc = metrics_from_confusion(train_cm).acc;
    rec.dev = evaluate(current, dev_set);
    rec.improved = stopper.update(epoch, rec.dev.rms);
    if (rec.improved) {
      result.model.labeler.params() = net.params();
      result.best_epoch = epoch;
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stopper.should_stop()) break;
  }
  result.model.labeler.params().zero_grad();
  return result;
}

}  // namespace wordimp
