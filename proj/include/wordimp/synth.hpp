#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "wordimp/corpus.hpp"
#include "wordimp/nn/param.hpp"
#include "wordimp/signal_io.hpp"

namespace wordimp {

// Synthetic dialogue turns whose word prosody encodes the importance label:
// HI words are long, loud and rising; MI words moderate and flat; LI words
// short, quiet and falling. Speakers differ in base pitch and loudness.

struct SynthUtterance {
  LabeledUtterance meta;
  AudioBuffer audio;
};

/// Mid-bin score for each label (0.15 / 0.45 / 0.8).
double synth_score(Label label);

/// Deterministic in (n, seed). Labels are balanced over the whole corpus.
std::vector<SynthUtterance> generate_synth_corpus(int n_utterances, std::uint64_t seed,
                                                  double sample_rate = 16000.0);

/// Writes `<dir>/corpus.jsonl` and `<dir>/wav/<id>.wav`. With `snr_db`, white
/// noise is mixed into every turn first. Returns the corpus as written.
std::vector<LabeledUtterance> write_synth_corpus(const std::filesystem::path& dir,
                                                 int n_utterances, std::uint64_t seed,
                                                 std::optional<double> snr_db = std::nullopt);

}  // namespace wordimp
