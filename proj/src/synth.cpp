#include "wordimp/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "wordimp/errors.hpp"

namespace wordimp {
namespace {

struct Speaker {
  const char* id;
  double f0;
  double gain;
};

constexpr std::array<Speaker, 4> kSpeakers = {{
    {"spk_a", 110.0, 1.0},
    {"spk_b", 145.0, 0.8},
    {"spk_c", 185.0, 1.1},
    {"spk_d", 220.0, 0.9},
}};

struct WordShape {
  double min_dur, max_dur;
  double amplitude;
  double pitch_from, pitch_to;  // multiples of the speaker's f0
};

WordShape shape_of(Label l) {
  switch (l) {
    case Label::HI: return {0.30, 0.42, 0.70, 1.20, 1.60};
    case Label::MI: return {0.20, 0.28, 0.35, 1.05, 1.05};
    case Label::LI: return {0.08, 0.14, 0.08, 1.00, 0.85};
  }
  return {};
}

constexpr std::array<std::array<const char*, 4>, kNumLabels> kTokens = {{
    {"uh", "the", "of", "um"},
    {"going", "really", "think", "know"},
    {"weather", "boston", "college", "football"},
}};

// Harmonic tone with raised-cosine onset/offset ramps, written into `out`.
void render_word(Eigen::VectorXd& out, Eigen::Index first, Eigen::Index count, double rate,
                 double f_start, double f_end, double amplitude) {
  constexpr std::array<double, 3> harmonics = {1.0, 0.5, 0.25};
  const double norm = 1.0 / (harmonics[0] + harmonics[1] + harmonics[2]);
  const auto ramp = std::min<Eigen::Index>(static_cast<Eigen::Index>(0.015 * rate), count / 4);
  double phase = 0.0;
  for (Eigen::Index k = 0; k < count; ++k) {
    const double u = count > 1 ? static_cast<double>(k) / static_cast<double>(count - 1) : 0.0;
    const double f = f_start + (f_end - f_start) * u;
    phase += 2.0 * std::numbers::pi * f / rate;
    double env = 1.0;
    if (ramp > 0 && k < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * k / ramp);
    if (ramp > 0 && count - 1 - k < ramp) {
      env = std::min(env, 0.5 - 0.5 * std::cos(std::numbers::pi * (count - 1 - k) / ramp));
    }
    double s = 0.0;
    for (std::size_t h = 0; h < harmonics.size(); ++h) s += harmonics[h] * std::sin(phase * (h + 1.0));
    out[first + k] += amplitude * env * norm * s;
  }
}

}  // namespace

double synth_score(Label label) {
  switch (label) {
    case Label::LI: return 0.15;
    case Label::MI: return 0.45;
    case Label::HI: return 0.8;
  }
  return 0.0;
}

std::vector<SynthUtterance> generate_synth_corpus(int n_utterances, std::uint64_t seed,
                                                  double sample_rate) {
  if (n_utterances < 1) throw ConfigError("synth corpus needs at least one utterance");
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  std::vector<int> word_counts(static_cast<std::size_t>(n_utterances));
  std::uniform_int_distribution<int> count_dist(3, 8);
  for (int& c : word_counts) c = count_dist(rng);
  const int total = std::accumulate(word_counts.begin(), word_counts.end(), 0);
  std::vector<Label> labels(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) labels[static_cast<std::size_t>(i)] = label_from_ord(i % kNumLabels);
  std::shuffle(labels.begin(), labels.end(), rng);

  std::vector<SynthUtterance> corpus;
  std::size_t next_label = 0;
  for (int u = 0; u < n_utterances; ++u) {
    const Speaker& spk = kSpeakers[static_cast<std::size_t>(u) % kSpeakers.size()];
    SynthUtterance out;
    out.meta.utterance_id = "synth_" + std::to_string(seed) + "_" + std::to_string(u);
    out.meta.speaker_id = spk.id;
    out.meta.audio_path = out.meta.utterance_id + ".wav";

    struct Placed {
      Label label;
      double start, end, f_from, f_to, amp;
    };
    std::vector<Placed> placed;
    double t = uniform(0.10, 0.20);
    for (int w = 0; w < word_counts[static_cast<std::size_t>(u)]; ++w) {
      const Label l = labels[next_label++];
      const WordShape s = shape_of(l);
      const double dur = uniform(s.min_dur, s.max_dur);
      const double jitter = uniform(0.97, 1.03);
      placed.push_back({l, t, t + dur, spk.f0 * s.pitch_from * jitter, spk.f0 * s.pitch_to * jitter,
                        std::min(0.95, s.amplitude * spk.gain * uniform(0.9, 1.1))});
      t += dur + uniform(0.05, 0.20);
    }
    const double duration = t + 0.10;

    out.audio.sample_rate = sample_rate;
    const auto n_samples = static_cast<Eigen::Index>(std::ceil(duration * sample_rate));
    out.audio.samples.resize(n_samples);
    std::normal_distribution<double> floor_noise(0.0, 0.002);
    for (Eigen::Index i = 0; i < n_samples; ++i) out.audio.samples[i] = floor_noise(rng);

    for (std::size_t w = 0; w < placed.size(); ++w) {
      const Placed& p = placed[w];
      // Word boundaries are quantized to whole milliseconds, like annotated timestamps.
      const double start = std::round(p.start * 1000.0) / 1000.0;
      const double end = std::round(p.end * 1000.0) / 1000.0;
      const auto first = static_cast<Eigen::Index>(std::floor(start * sample_rate));
      const auto last = std::min(n_samples, static_cast<Eigen::Index>(std::floor(end * sample_rate)));
      render_word(out.audio.samples, first, last - first, sample_rate, p.f_from, p.f_to, p.amp);
      const auto& vocab = kTokens[static_cast<std::size_t>(ord(p.label))];
      out.meta.words.push_back({vocab[w % vocab.size()], start, end});
      out.meta.scores.push_back(synth_score(p.label));
    }
    corpus.push_back(std::move(out));
  }
  return corpus;
}

std::vector<LabeledUtterance> write_synth_corpus(const std::filesystem::path& dir,
                                                 int n_utterances, std::uint64_t seed,
                                                 std::optional<double> snr_db) {
  std::filesystem::create_directories(dir / "wav");
  std::vector<SynthUtterance> synth = generate_synth_corpus(n_utterances, seed);
  std::vector<LabeledUtterance> corpus;
  for (std::size_t i = 0; i < synth.size(); ++i) {
    SynthUtterance& s = synth[i];
    const AudioBuffer audio = snr_db ? add_white_noise(s.audio, *snr_db, seed + 3 + i) : s.audio;
    s.meta.audio_path = dir / "wav" / s.meta.audio_path;
    write_wav(s.meta.audio_path, audio);
    corpus.push_back(s.meta);
  }
  write_corpus(dir / "corpus.jsonl", corpus);
  return corpus;
}

}  // namespace wordimp
