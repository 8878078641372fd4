#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "wordimp/dsp.hpp"
#include "wordimp/signal_io.hpp"

namespace wordimp {

inline constexpr int kRawAcousticDim = 24;
inline constexpr int kRawLexicalDim = 6;
inline constexpr int kRawFeatureDim = kRawAcousticDim + kRawLexicalDim;
inline constexpr int kWindowDim = 2 * kRawAcousticDim;
inline constexpr int kLexicalDim = 2 * kRawLexicalDim;

// Raw acoustic layout within a 24-dim window vector.
inline constexpr int kPitchStatsOffset = 0;
inline constexpr int kEnergyStatsOffset = 10;
inline constexpr int kBandRmsIndex = 20;
inline constexpr int kTiltIndex = 21;
inline constexpr int kHnrIndex = 22;
inline constexpr int kVoicedRatioIndex = 23;

// Raw lexical layout within a 6-dim lexical vector.
enum LexicalIndex : int {
  kDuration = 0,
  kPosition = 1,
  kSilenceBefore = 2,
  kSyllables = 3,
  kSyllableDuration = 4,
  kArticulationRate = 5,
};

struct WordTiming {
  std::string token;
  double start = 0.0;
  double end = 0.0;
};

struct WindowSpan {
  double start = 0.0;
  double end = 0.0;
  bool operator==(const WindowSpan&) const = default;
};

struct AssemblyConfig {
  double tau_s = 0.050;
  double hop_s = 0.040;
  DspConfig dsp;
};

/// Sub-word windows of one word: rows are windows, columns the 48 features
/// (24 raw followed by their speaker z-scores).
struct SubwordFeatureSeq {
  Eigen::MatrixXd windows;
  std::vector<WindowSpan> spans;
};

/// 6 raw lexical features followed by their speaker z-scores.
struct WordLexicalFeatures {
  Eigen::Matrix<double, kLexicalDim, 1> vector;
};

struct WordFeatures {
  SubwordFeatureSeq subword;
  WordLexicalFeatures lexical;
};

/// Raw (un-normalized) features of one word, before z-norm augmentation.
struct RawWordFeatures {
  Eigen::MatrixXd windows;  // n x 24
  std::vector<WindowSpan> spans;
  Eigen::Matrix<double, kRawLexicalDim, 1> lexical;
};

struct RawUtteranceFeatures {
  std::string speaker;
  std::vector<RawWordFeatures> words;
  // Windows that contained no frame center and were left as zero vectors.
  std::size_t empty_windows = 0;
};

/// Per-speaker mean/std over the 30 raw features (24 acoustic, then 6 lexical),
/// with a pooled fallback for speakers not seen in training.
struct SpeakerStats {
  struct Moments {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(kRawFeatureDim);
    Eigen::VectorXd std = Eigen::VectorXd::Zero(kRawFeatureDim);
  };
  std::map<std::string, Moments, std::less<>> speakers;
  Moments global;

  const Moments& lookup(std::string_view speaker) const;
};

enum class FeatureBlock { Acoustic, Lexical };

std::vector<WindowSpan> subword_windows(const WordTiming& word, double tau = 0.050,
                                        double hop = 0.040);

/// 24-dim raw window vector from the frames whose centers fall in `span`.
/// Returns zeros (and sets *empty when given) if no frame center is inside.
Eigen::Matrix<double, kRawAcousticDim, 1> subword_features(const FrameTrack& track,
                                                           const WindowSpan& span,
                                                           bool* empty = nullptr);

Eigen::Matrix<double, kRawLexicalDim, 1> lexical_features(std::size_t index,
                                                          const std::vector<WordTiming>& words,
                                                          int syllables);

/// Raw per-word features of one utterance. Throws DataError when a word falls
/// outside the audio.
RawUtteranceFeatures extract_raw_utterance(const AudioBuffer& audio,
                                           const std::vector<WordTiming>& words,
                                           std::string speaker, const AssemblyConfig& cfg = {});

/// Throws DataError on an empty corpus.
SpeakerStats fit_speaker_stats(const std::vector<RawUtteranceFeatures>& training);

/// Appends z-scores to `raw` (24 acoustic or 6 lexical values). Features with
/// std < 1e-8 get z = 0; unseen speakers use the pooled statistics.
Eigen::VectorXd znorm_augment(const Eigen::Ref<const Eigen::VectorXd>& raw,
                              std::string_view speaker, const SpeakerStats& stats,
                              FeatureBlock block);

std::vector<WordFeatures> augment_utterance(const RawUtteranceFeatures& raw,
                                            const SpeakerStats& stats);

std::vector<WordFeatures> assemble_utterance(const AudioBuffer& audio,
                                             const std::vector<WordTiming>& words,
                                             const std::string& speaker,
                                             const SpeakerStats& stats,
                                             const AssemblyConfig& cfg = {});

/// Column names of the 48 window features and 12 lexical features.
const std::array<std::string, kWindowDim>& window_feature_names();
const std::array<std::string, kLexicalDim>& lexical_feature_names();

// Feature groups removable for ablation.
enum class FeatureGroup { Energy, Frequency, Voicing, Lexical, ZNorm };

FeatureGroup parse_feature_group(std::string_view name);
std::string_view to_string(FeatureGroup group);

/// Indices of window and lexical columns fed to the model.
struct FeatureSelection {
  std::vector<int> window;
  std::vector<int> lexical;

  static FeatureSelection all();
  FeatureSelection without(FeatureGroup group) const;
  /// Distinct features counted once regardless of window count.
  int feature_count() const { return static_cast<int>(window.size() + lexical.size()); }
  bool operator==(const FeatureSelection&) const = default;
};

/// Header line of the text feature dump.
inline constexpr std::string_view kFeatureDumpHeader =
    "# wordimp-features v1 window_dim=48 lexical_dim=12";

/// One record per word: a `word` line (utterance id, index, token, window
/// count), the window rows, then a `lex` row.
void write_feature_dump(std::ostream& os, const std::string& utterance_id,
                        const std::vector<WordTiming>& words,
                        const std::vector<WordFeatures>& features);

}  // namespace wordimp
