#include "wordimp/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "wordimp/errors.hpp"

namespace wordimp {
namespace {

constexpr double kTimeEps = 1e-9;
constexpr double kMinStd = 1e-8;

int block_offset(FeatureBlock block) {
  return block == FeatureBlock::Acoustic ? 0 : kRawAcousticDim;
}

int block_size(FeatureBlock block) {
  return block == FeatureBlock::Acoustic ? kRawAcousticDim : kRawLexicalDim;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void append_range(std::vector<int>& out, int first, int count) {
  for (int i = 0; i < count; ++i) out.push_back(first + i);
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const SpeakerStats::Moments& SpeakerStats::lookup(std::string_view speaker) const {
  const auto it = speakers.find(speaker);
  return it == speakers.end() ? global : it->second;
}

std::vector<WindowSpan> subword_windows(const WordTiming& word, double tau, double hop) {
  if (!(tau > 0.0) || !(hop > 0.0) || hop > tau + kTimeEps) {
    throw ConfigError("subword_windows: need tau > 0 and 0 < hop <= tau");
  }
  const double dur = word.end - word.start;
  if (dur <= tau + kTimeEps) return {{word.start, word.end}};
  const auto count = static_cast<std::size_t>(std::floor((dur - tau) / hop + kTimeEps)) + 1;
  std::vector<WindowSpan> spans;
  spans.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double s = word.start + static_cast<double>(k) * hop;
    spans.push_back({s, std::min(s + tau, word.end)});
  }
  return spans;
}

Eigen::Matrix<double, kRawAcousticDim, 1> subword_features(const FrameTrack& track,
                                                           const WindowSpan& span, bool* empty) {
  Eigen::Matrix<double, kRawAcousticDim, 1> out = Eigen::Matrix<double, kRawAcousticDim, 1>::Zero();

  // Stat times are offsets from the first frame centre inside the span.
  std::vector<double> all_t, rms, band, voiced_t, pitch, tilt, hnr_vals;
  double origin = 0.0;
  for (std::size_t i = 0; i < track.size(); ++i) {
    const double t = track.frame_times[i];
    if (t < span.start - kTimeEps || t > span.end + kTimeEps) continue;
    if (all_t.empty()) origin = t;
    const double rel = t - origin;
    all_t.push_back(rel);
    rms.push_back(track.rms[i]);
    band.push_back(track.band_rms[i]);
    if (track.pitch_hz[i]) {
      voiced_t.push_back(rel);
      pitch.push_back(*track.pitch_hz[i]);
      if (track.tilt_db[i]) tilt.push_back(*track.tilt_db[i]);
      if (track.hnr_db[i]) hnr_vals.push_back(*track.hnr_db[i]);
    }
  }
  if (empty) *empty = all_t.empty();
  if (all_t.empty()) return out;

  auto mean = [](const std::vector<double>& v) { return v.empty() ? 0.0 : to_vector(v).mean(); };
  if (!pitch.empty()) {
    out.segment<ContourStats::kSize>(kPitchStatsOffset) =
        contour_stats(to_vector(pitch), to_vector(voiced_t)).as_vector();
  }
  out.segment<ContourStats::kSize>(kEnergyStatsOffset) =
      contour_stats(to_vector(rms), to_vector(all_t)).as_vector();
  out[kBandRmsIndex] = mean(band);
  out[kTiltIndex] = mean(tilt);
  out[kHnrIndex] = mean(hnr_vals);
  out[kVoicedRatioIndex] = static_cast<double>(pitch.size()) / static_cast<double>(all_t.size());
  return out;
}

Eigen::Matrix<double, kRawLexicalDim, 1> lexical_features(std::size_t index,
                                                          const std::vector<WordTiming>& words,
                                                          int syllables) {
  const WordTiming& w = words.at(index);
  const double n = static_cast<double>(words.size());
  const double duration = w.end - w.start;
  const double prev_end = index == 0 ? 0.0 : words[index - 1].end;
  const double syl = std::max(0, syllables);

  Eigen::Matrix<double, kRawLexicalDim, 1> out;
  out[kDuration] = duration;
  out[kPosition] = static_cast<double>(index) / std::max(1.0, n - 1.0);
  out[kSilenceBefore] = std::max(0.0, w.start - prev_end);
  out[kSyllables] = syl;
  out[kSyllableDuration] = duration / std::max(1.0, syl);
  out[kArticulationRate] = duration > 0.0 ? syl / duration : 0.0;
  return out;
}

RawUtteranceFeatures extract_raw_utterance(const AudioBuffer& audio,
                                           const std::vector<WordTiming>& words,
                                           std::string speaker, const AssemblyConfig& cfg) {
  RawUtteranceFeatures out;
  out.speaker = std::move(speaker);
  if (words.empty()) return out;

  const double dur = audio.duration();
  for (std::size_t i = 0; i < words.size(); ++i) {
    const WordTiming& w = words[i];
    if (!(w.start >= 0.0) || !(w.start < w.end) || w.end > dur + 1e-6) {
      throw DataError("word " + std::to_string(i) + " ('" + w.token + "') spans [" +
                      std::to_string(w.start) + ", " + std::to_string(w.end) +
                      "] outside audio of " + std::to_string(dur) + " s");
    }
  }

  const FrameTrack track = compute_frame_track(audio, cfg.dsp);
  out.words.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    RawWordFeatures wf;
    wf.spans = subword_windows(words[i], cfg.tau_s, cfg.hop_s);
    wf.windows.resize(static_cast<Eigen::Index>(wf.spans.size()), kRawAcousticDim);
    for (std::size_t k = 0; k < wf.spans.size(); ++k) {
      bool empty = false;
      wf.windows.row(static_cast<Eigen::Index>(k)) =
          subword_features(track, wf.spans[k], &empty).transpose();
      if (empty) ++out.empty_windows;
    }
    const double end = std::min(words[i].end, dur);
    const int syllables = detect_syllable_nuclei(audio, {words[i].start, end}, track, cfg.dsp);
    wf.lexical = lexical_features(i, words, syllables);
    out.words.push_back(std::move(wf));
  }
  return out;
}

SpeakerStats fit_speaker_stats(const std::vector<RawUtteranceFeatures>& training) {
  struct Accum {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(kRawFeatureDim);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(kRawFeatureDim);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(kRawFeatureDim);
  };
  std::map<std::string, Accum, std::less<>> per_speaker;

  for (const RawUtteranceFeatures& utt : training) {
    Accum& acc = per_speaker[utt.speaker];
    for (const RawWordFeatures& w : utt.words) {
      for (Eigen::Index r = 0; r < w.windows.rows(); ++r) {
        acc.sum.head<kRawAcousticDim>() += w.windows.row(r).transpose();
        acc.count.head<kRawAcousticDim>().array() += 1.0;
      }
      acc.sum.tail<kRawLexicalDim>() += w.lexical;
      acc.count.tail<kRawLexicalDim>().array() += 1.0;
    }
  }
  if (per_speaker.empty()) throw DataError("fit_speaker_stats: empty training corpus");

  // Two passes: means first, then centered second moments.
  auto finish_means = [](const Accum& a) {
    SpeakerStats::Moments m;
    for (Eigen::Index j = 0; j < kRawFeatureDim; ++j) {
      m.mean[j] = a.count[j] > 0 ? a.sum[j] / a.count[j] : 0.0;
    }
    return m;
  };
  SpeakerStats stats;
  Accum pooled;
  for (const auto& [spk, acc] : per_speaker) {
    stats.speakers.emplace(spk, finish_means(acc));
    pooled.sum += acc.sum;
    pooled.count += acc.count;
  }
  stats.global = finish_means(pooled);

  for (const RawUtteranceFeatures& utt : training) {
    Accum& acc = per_speaker[utt.speaker];
    const Eigen::VectorXd& mu = stats.speakers[utt.speaker].mean;
    for (const RawWordFeatures& w : utt.words) {
      for (Eigen::Index r = 0; r < w.windows.rows(); ++r) {
        const Eigen::VectorXd x = w.windows.row(r).transpose();
        acc.sq.head<kRawAcousticDim>().array() += (x - mu.head<kRawAcousticDim>()).array().square();
        pooled.sq.head<kRawAcousticDim>().array() +=
            (x - stats.global.mean.head<kRawAcousticDim>()).array().square();
      }
      acc.sq.tail<kRawLexicalDim>().array() += (w.lexical - mu.tail<kRawLexicalDim>()).array().square();
      pooled.sq.tail<kRawLexicalDim>().array() +=
          (w.lexical - stats.global.mean.tail<kRawLexicalDim>()).array().square();
    }
  }
  auto finish_std = [](const Accum& a, SpeakerStats::Moments& m) {
    for (Eigen::Index j = 0; j < kRawFeatureDim; ++j) {
      m.std[j] = a.count[j] > 0 ? std::sqrt(a.sq[j] / a.count[j]) : 0.0;
    }
  };
  for (auto& [spk, m] : stats.speakers) finish_std(per_speaker[spk], m);
  finish_std(pooled, stats.global);
  return stats;
}

Eigen::VectorXd znorm_augment(const Eigen::Ref<const Eigen::VectorXd>& raw,
                              std::string_view speaker, const SpeakerStats& stats,
                              FeatureBlock block) {
  const int n = block_size(block);
  if (raw.size() != n) {
    throw DataError("znorm_augment: expected " + std::to_string(n) + " raw features, got " +
                    std::to_string(raw.size()));
  }
  const SpeakerStats::Moments& m = stats.lookup(speaker);
  const int off = block_offset(block);
  Eigen::VectorXd out(2 * n);
  out.head(n) = raw;
  for (int j = 0; j < n; ++j) {
    const double sd = m.std[off + j];
    out[n + j] = sd < kMinStd ? 0.0 : (raw[j] - m.mean[off + j]) / sd;
  }
  return out;
}

std::vector<WordFeatures> augment_utterance(const RawUtteranceFeatures& raw,
                                            const SpeakerStats& stats) {
  std::vector<WordFeatures> out;
  out.reserve(raw.words.size());
  for (const RawWordFeatures& w : raw.words) {
    WordFeatures wf;
    wf.subword.spans = w.spans;
    wf.subword.windows.resize(w.windows.rows(), kWindowDim);
    for (Eigen::Index r = 0; r < w.windows.rows(); ++r) {
      wf.subword.windows.row(r) =
          znorm_augment(w.windows.row(r).transpose(), raw.speaker, stats, FeatureBlock::Acoustic)
              .transpose();
    }
    wf.lexical.vector = znorm_augment(w.lexical, raw.speaker, stats, FeatureBlock::Lexical);
    out.push_back(std::move(wf));
  }
  return out;
}

std::vector<WordFeatures> assemble_utterance(const AudioBuffer& audio,
                                             const std::vector<WordTiming>& words,
                                             const std::string& speaker,
                                             const SpeakerStats& stats,
                                             const AssemblyConfig& cfg) {
  return augment_utterance(extract_raw_utterance(audio, words, speaker, cfg), stats);
}

const std::array<std::string, kWindowDim>& window_feature_names() {
  static const std::array<std::string, kWindowDim> names = [] {
    const char* stat[] = {"min", "tmin", "max", "tmax", "mean",
                          "median", "range", "slope", "std", "skew"};
    std::array<std::string, kWindowDim> n;
    for (int i = 0; i < 10; ++i) {
      n[kPitchStatsOffset + i] = std::string("pitch_") + stat[i];
      n[kEnergyStatsOffset + i] = std::string("energy_") + stat[i];
    }
    n[kBandRmsIndex] = "band_rms_mean";
    n[kTiltIndex] = "h1h2_mean";
    n[kHnrIndex] = "hnr_mean";
    n[kVoicedRatioIndex] = "voiced_ratio";
    for (int i = 0; i < kRawAcousticDim; ++i) n[kRawAcousticDim + i] = "z_" + n[i];
    return n;
  }();
  return names;
}

const std::array<std::string, kLexicalDim>& lexical_feature_names() {
  static const std::array<std::string, kLexicalDim> names = {
      "duration",   "position",   "silence_before",   "syllables",   "syllable_duration",
      "artic_rate", "z_duration", "z_position",       "z_silence_before", "z_syllables",
      "z_syllable_duration", "z_artic_rate"};
  return names;
}

FeatureGroup parse_feature_group(std::string_view name) {
  if (name == "eng") return FeatureGroup::Energy;
  if (name == "freq") return FeatureGroup::Frequency;
  if (name == "voc") return FeatureGroup::Voicing;
  if (name == "lex") return FeatureGroup::Lexical;
  if (name == "znorm") return FeatureGroup::ZNorm;
  throw ConfigError("unknown feature group '" + std::string(name) +
                    "' (expected eng, freq, voc, lex or znorm)");
}

std::string_view to_string(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::Energy: return "eng";
    case FeatureGroup::Frequency: return "freq";
    case FeatureGroup::Voicing: return "voc";
    case FeatureGroup::Lexical: return "lex";
    case FeatureGroup::ZNorm: return "znorm";
  }
  return "?";
}

FeatureSelection FeatureSelection::all() {
  FeatureSelection s;
  append_range(s.window, 0, kWindowDim);
  append_range(s.lexical, 0, kLexicalDim);
  return s;
}

FeatureSelection FeatureSelection::without(FeatureGroup group) const {
  // Raw-space indices of the removed columns; their z copies go too.
  std::vector<int> drop_window, drop_lexical;
  switch (group) {
    case FeatureGroup::Frequency:
      append_range(drop_window, kPitchStatsOffset, ContourStats::kSize);
      break;
    case FeatureGroup::Energy:
      append_range(drop_window, kEnergyStatsOffset, ContourStats::kSize);
      drop_window.push_back(kBandRmsIndex);
      break;
    case FeatureGroup::Voicing:
      append_range(drop_window, kTiltIndex, 3);
      break;
    case FeatureGroup::Lexical:
      append_range(drop_lexical, 0, kRawLexicalDim);
      break;
    case FeatureGroup::ZNorm: break;
  }
  auto keep = [](const std::vector<int>& from, const std::vector<int>& drop, int raw_dim,
                 bool drop_z) {
    std::vector<int> out;
    for (int idx : from) {
      const int base = idx % raw_dim;
      const bool is_z = idx >= raw_dim;
      const bool dropped = (drop_z && is_z) ||
                           std::find(drop.begin(), drop.end(), base) != drop.end();
      if (!dropped) out.push_back(idx);
    }
    return out;
  };
  const bool drop_z = group == FeatureGroup::ZNorm;
  FeatureSelection s;
  s.window = keep(window, drop_window, kRawAcousticDim, drop_z);
  s.lexical = keep(lexical, drop_lexical, kRawLexicalDim, drop_z);
  return s;
}

void write_feature_dump(std::ostream& os, const std::string& utterance_id,
                        const std::vector<WordTiming>& words,
                        const std::vector<WordFeatures>& features) {
  if (words.size() != features.size()) {
    throw InternalError("write_feature_dump: word/feature count mismatch");
  }
  os << kFeatureDumpHeader << '\n';
  for (std::size_t i = 0; i < words.size(); ++i) {
    const Eigen::MatrixXd& win = features[i].subword.windows;
    os << "word\t" << utterance_id << '\t' << i << '\t' << words[i].token << '\t' << win.rows()
       << '\n';
    for (Eigen::Index r = 0; r < win.rows(); ++r) {
      for (Eigen::Index c = 0; c < win.cols(); ++c) os << (c ? "\t" : "") << format_value(win(r, c));
      os << '\n';
    }
    os << "lex";
    for (Eigen::Index c = 0; c < kLexicalDim; ++c) os << '\t' << format_value(features[i].lexical.vector[c]);
    os << '\n';
  }
}

}  // namespace wordimp
