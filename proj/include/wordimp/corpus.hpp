#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wordimp/features.hpp"

namespace wordimp {

/// One annotated dialogue turn. `audio_path` is resolved against the corpus
/// file's directory when loaded.
struct LabeledUtterance {
  std::string utterance_id;
  std::string speaker_id;
  std::filesystem::path audio_path;
  std::vector<WordTiming> words;
  std::vector<double> scores;
};

/// Reads the JSONL corpus (`utterance_id`, `speaker_id`, `audio_path`,
/// `words` = [{token, start_s, end_s, score}]). Throws DataError naming the
/// offending line on any malformed or invalid record.
std::vector<LabeledUtterance> load_corpus(const std::filesystem::path& path);

/// Writes records in the same schema; audio paths are written relative to
/// the corpus directory when they live beneath it.
void write_corpus(const std::filesystem::path& path, const std::vector<LabeledUtterance>& corpus);

/// Throws DataError if the utterance violates a record invariant.
void validate_utterance(const LabeledUtterance& utt);

struct SplitFractions {
  double train = 0.8, dev = 0.1, test = 0.1;
};

struct CorpusSplit {
  std::vector<LabeledUtterance> train, dev, test;
};

/// Seeded shuffle, then contiguous dev/test slices of floor(fraction * n)
/// (at least one each when the fraction is positive); the remainder is train.
CorpusSplit split_corpus(const std::vector<LabeledUtterance>& corpus, const SplitFractions& f,
                         std::uint64_t seed);

/// ASR output for one turn; word times are optional.
struct AsrHypothesis {
  std::string utterance_id;
  std::vector<std::string> tokens;
  std::optional<std::vector<WordTiming>> word_times;
};

/// JSONL records {utterance_id, hyp_tokens, hyp_word_times?} where
/// hyp_word_times is a list of [start_s, end_s] pairs.
std::vector<AsrHypothesis> load_hypotheses(const std::filesystem::path& path);

}  // namespace wordimp
