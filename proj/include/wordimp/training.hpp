#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "wordimp/corpus.hpp"
#include "wordimp/evaluation.hpp"
#include "wordimp/nn/adam.hpp"
#include "wordimp/pipeline.hpp"

namespace wordimp {

struct TrainConfig {
  int batch_max_turns = 20;
  int patience = 7;
  int max_epochs = 100;
  double lr = 0.001;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  SplitFractions fractions;
  HeadKind head = HeadKind::Ordinal;
  AssemblyConfig assembly;
  FeatureSelection features = FeatureSelection::all();
  int gru_hidden = 32;
  int lstm_hidden = 128;

  void validate() const;
};

// Seed offsets from the single user-facing seed.
inline constexpr std::uint64_t kSplitSeedOffset = 0;
inline constexpr std::uint64_t kInitSeedOffset = 1;
inline constexpr std::uint64_t kShuffleSeedOffset = 2;

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  Metrics dev;
  bool improved = false;
};

nlohmann::json to_json(const EpochRecord& r);

/// Tracks the best (lowest) monitored value and signals a stop after
/// `patience` consecutive epochs without strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  /// Returns true when `value` is a new best.
  bool update(int epoch, double value);
  bool should_stop() const { return stale_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_value() const { return best_; }

 private:
  int patience_;
  int stale_ = 0;
  int best_epoch_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

/// Contiguous batches of at most `max_turns` utterances over `order`.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order,
                                                   int max_turns);

struct TrainResult {
  ImportanceModel model;  // parameters of the best dev-RMS epoch
  int best_epoch = 0;
  std::vector<EpochRecord> log;
  // Utterances that contributed to speaker statistics, input scaling and
  // parameter updates.
  std::vector<std::string> fitted_on;
};

/// Called after each epoch with the record just appended.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Fits speaker statistics and input scaling on `train`, then runs Adam over
/// seeded-shuffled batches with early stopping on dev RMS. Throws
/// InternalError when the loss diverges.
TrainResult train(const std::vector<Example>& train, const std::vector<Example>& dev,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace wordimp
