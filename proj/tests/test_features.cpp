#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "wordimp/errors.hpp"
#include "wordimp/features.hpp"

using namespace wordimp;
using namespace wordimp::testing;

namespace {

constexpr double kRate = 16000.0;

RawUtteranceFeatures fake_utterance(const std::string& speaker, std::vector<double> acoustic_first,
                                    std::vector<double> lexical_first) {
  RawUtteranceFeatures u;
  u.speaker = speaker;
  for (std::size_t i = 0; i < acoustic_first.size(); ++i) {
    RawWordFeatures w;
    w.windows = Eigen::MatrixXd::Constant(1, kRawAcousticDim, 2.0);
    w.windows(0, 0) = acoustic_first[i];
    w.lexical.setConstant(4.0);
    w.lexical[0] = lexical_first[i];
    u.words.push_back(w);
  }
  return u;
}

}  // namespace

TEST_CASE("subword windows") {
  SUBCASE("200 ms word") {
    const auto w = subword_windows({"x", 1.0, 1.2});
    REQUIRE(w.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(w[k].start == doctest::Approx(1.0 + 0.04 * static_cast<double>(k)));
      CHECK(w[k].end == doctest::Approx(w[k].start + 0.05));
    }
  }
  SUBCASE("short and exact words") {
    CHECK(subword_windows({"x", 0.0, 0.03}) == std::vector<WindowSpan>{{0.0, 0.03}});
    const auto exact = subword_windows({"x", 0.0, 0.05});
    REQUIRE(exact.size() == 1);
    CHECK(exact[0].end == doctest::Approx(0.05));
    CHECK(subword_windows({"x", 0.11, 0.16}).size() == 1);
  }
  SUBCASE("spans stay inside the word") {
    for (double dur = 0.01; dur < 1.0; dur += 0.0137) {
      for (double hop : {0.01, 0.025, 0.04, 0.05}) {
        const WordTiming word{"x", 0.3, 0.3 + dur};
        const auto spans = subword_windows(word, 0.05, hop);
        CHECK(!spans.empty());
        for (const WindowSpan& s : spans) {
          CHECK(s.start >= word.start - 1e-12);
          CHECK(s.end <= word.end + 1e-12);
          CHECK(s.end > s.start);
        }
        if (dur > 0.05 + 1e-9) {
          CHECK(spans.size() == static_cast<std::size_t>(std::floor((dur - 0.05) / hop + 1e-9)) + 1);
        }
      }
    }
  }
  SUBCASE("bad configuration") {
    CHECK_THROWS_AS(subword_windows({"x", 0.0, 0.2}, 0.05, 0.06), ConfigError);
    CHECK_THROWS_AS(subword_windows({"x", 0.0, 0.2}, 0.0, 0.0), ConfigError);
  }
}

TEST_CASE("subword features") {
  SUBCASE("pure tone") {
    const FrameTrack t = compute_frame_track({sine(440.0, 0.5, kRate, 0.5), kRate});
    const auto f = subword_features(t, {0.1, 0.15});
    CHECK(f[kPitchStatsOffset + 4] == doctest::Approx(440.0).epsilon(0.005));
    CHECK(f[kPitchStatsOffset + 6] < 2.0);
    CHECK(f[kVoicedRatioIndex] == 1.0);
    CHECK(f[kEnergyStatsOffset + 4] == doctest::Approx(0.5 / std::sqrt(2.0)).epsilon(0.02));
    CHECK(f.allFinite());
  }
  SUBCASE("silence") {
    const FrameTrack t = compute_frame_track({Eigen::VectorXd::Zero(8000), kRate});
    bool empty = true;
    CHECK(subword_features(t, {0.1, 0.15}, &empty).isZero(0.0));
    CHECK(!empty);
  }
  SUBCASE("constant pitch gives zero range and slope") {
    const FrameTrack t = compute_frame_track({sine(200.0, 0.5, kRate), kRate});
    FrameTrack flat = t;
    for (auto& p : flat.pitch_hz) p = 200.0;
    const auto f = subword_features(flat, {0.1, 0.2});
    CHECK(f[kPitchStatsOffset + 6] == 0.0);
    CHECK(f[kPitchStatsOffset + 7] == 0.0);
  }
  SUBCASE("window without frame centres") {
    const FrameTrack t = compute_frame_track({sine(200.0, 0.5, kRate), kRate});
    bool empty = false;
    CHECK(subword_features(t, {0.1301, 0.1302}, &empty).isZero(0.0));
    CHECK(empty);
  }
}

TEST_CASE("lexical features") {
  const std::vector<WordTiming> words = {{"a", 0.2, 0.8}, {"b", 1.0, 1.5}, {"c", 1.5, 1.9}};
  const auto f = lexical_features(1, words, 2);
  CHECK(f[kDuration] == doctest::Approx(0.5));
  CHECK(f[kPosition] == doctest::Approx(0.5));
  CHECK(f[kSilenceBefore] == doctest::Approx(0.2));
  CHECK(f[kSyllables] == 2.0);
  CHECK(f[kSyllableDuration] == doctest::Approx(0.25));
  CHECK(f[kArticulationRate] == doctest::Approx(4.0));

  CHECK(lexical_features(0, {{"a", 0.0, 0.3}}, 1)[kSilenceBefore] == 0.0);
  CHECK(lexical_features(0, {{"a", 0.0, 0.3}}, 1)[kPosition] == 0.0);
  CHECK(lexical_features(0, words, 1)[kSilenceBefore] == doctest::Approx(0.2));

  const auto z = lexical_features(2, words, 0);
  CHECK(z[kSyllableDuration] == doctest::Approx(0.4));
  CHECK(z[kArticulationRate] == 0.0);
  CHECK(z[kPosition] == 1.0);
  CHECK(z[kSilenceBefore] == 0.0);
}

TEST_CASE("speaker statistics") {
  SUBCASE("population moments") {
    const SpeakerStats s = fit_speaker_stats({fake_utterance("a", {1.0, 3.0}, {1.0, 3.0})});
    const auto& m = s.lookup("a");
    CHECK(m.mean[0] == doctest::Approx(2.0));
    CHECK(m.std[0] == doctest::Approx(1.0));
    CHECK(m.mean[kRawAcousticDim] == doctest::Approx(2.0));
    CHECK(m.std[kRawAcousticDim] == doctest::Approx(1.0));
    CHECK(m.std[1] == 0.0);
  }
  SUBCASE("speakers are independent and global pools all") {
    const SpeakerStats s = fit_speaker_stats({fake_utterance("a", {1.0, 3.0}, {1.0, 3.0}),
                                              fake_utterance("b", {10.0, 10.0}, {5.0, 5.0})});
    CHECK(s.lookup("a").mean[0] == doctest::Approx(2.0));
    CHECK(s.lookup("b").mean[0] == doctest::Approx(10.0));
    CHECK(s.lookup("b").std[0] == 0.0);
    CHECK(s.global.mean[0] == doctest::Approx(6.0));
    CHECK(&s.lookup("unseen") == &s.global);
    const SpeakerStats only_a = fit_speaker_stats({fake_utterance("a", {1.0, 3.0}, {1.0, 3.0})});
    CHECK(only_a.lookup("a").mean == s.lookup("a").mean);
    CHECK(only_a.lookup("a").std == s.lookup("a").std);
  }
  SUBCASE("empty corpus") { CHECK_THROWS_AS(fit_speaker_stats({}), DataError); }
}

TEST_CASE("z-normalization") {
  const SpeakerStats s = fit_speaker_stats({fake_utterance("a", {1.0, 3.0}, {1.0, 3.0})});
  Eigen::VectorXd x = Eigen::VectorXd::Constant(kRawAcousticDim, 2.0);
  x[0] = 2.0;
  Eigen::VectorXd out = znorm_augment(x, "a", s, FeatureBlock::Acoustic);
  REQUIRE(out.size() == kWindowDim);
  CHECK(out.head(kRawAcousticDim) == x);
  CHECK(out[kRawAcousticDim] == 0.0);
  x[0] = 3.0;
  out = znorm_augment(x, "a", s, FeatureBlock::Acoustic);
  CHECK(out[kRawAcousticDim] == doctest::Approx(1.0));
  // Zero-variance column maps to zero regardless of value.
  x[1] = 100.0;
  CHECK(znorm_augment(x, "a", s, FeatureBlock::Acoustic)[kRawAcousticDim + 1] == 0.0);
  CHECK(znorm_augment(x, "nobody", s, FeatureBlock::Acoustic).allFinite());
  CHECK(znorm_augment(Eigen::VectorXd::Zero(kRawLexicalDim), "a", s, FeatureBlock::Lexical).size() == kLexicalDim);
  CHECK_THROWS_AS(znorm_augment(Eigen::VectorXd::Zero(5), "a", s, FeatureBlock::Lexical), DataError);
}

TEST_CASE("z-normed training features are standardized per speaker") {
  const auto synth = generate_synth_corpus(12, 5);
  std::vector<RawUtteranceFeatures> raw;
  for (const SynthUtterance& u : synth) raw.push_back(extract_raw_utterance(u.audio, u.meta.words, u.meta.speaker_id));
  const SpeakerStats stats = fit_speaker_stats(raw);

  for (const auto& [speaker, moments] : stats.speakers) {
    CAPTURE(speaker);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(kRawAcousticDim), sq = sum;
    Eigen::VectorXd lsum = Eigen::VectorXd::Zero(kRawLexicalDim), lsq = lsum;
    double n_win = 0, n_word = 0;
    for (const RawUtteranceFeatures& r : raw) {
      if (r.speaker != speaker) continue;
      for (const WordFeatures& w : augment_utterance(r, stats)) {
        for (Eigen::Index i = 0; i < w.subword.windows.rows(); ++i) {
          const Eigen::VectorXd z = w.subword.windows.row(i).tail(kRawAcousticDim).transpose();
          sum += z;
          sq += z.cwiseProduct(z);
          n_win += 1;
        }
        const Eigen::VectorXd lz = w.lexical.vector.tail(kRawLexicalDim);
        lsum += lz;
        lsq += lz.cwiseProduct(lz);
        n_word += 1;
      }
    }
    for (int j = 0; j < kRawFeatureDim; ++j) {
      CAPTURE(j);
      const bool lex = j >= kRawAcousticDim;
      const int k = lex ? j - kRawAcousticDim : j;
      const double n = lex ? n_word : n_win;
      const double mean = (lex ? lsum[k] : sum[k]) / n;
      const double var = (lex ? lsq[k] : sq[k]) / n - mean * mean;
      CHECK(std::abs(mean) < 1e-6);
      if (moments.std[j] >= 1e-8) {
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
      } else {
        CHECK(std::abs(var) < 1e-12);
      }
    }
  }
}

TEST_CASE("utterance assembly") {
  const auto synth = generate_synth_corpus(3, 21);
  const SynthUtterance& u = synth[0];
  std::vector<RawUtteranceFeatures> raw;
  for (const SynthUtterance& s : synth) raw.push_back(extract_raw_utterance(s.audio, s.meta.words, s.meta.speaker_id));
  const SpeakerStats stats = fit_speaker_stats(raw);

  const auto words = assemble_utterance(u.audio, u.meta.words, u.meta.speaker_id, stats);
  REQUIRE(words.size() == u.meta.words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto spans = subword_windows(u.meta.words[i]);
    CHECK(words[i].subword.spans == spans);
    CHECK(words[i].subword.windows.rows() == static_cast<Eigen::Index>(spans.size()));
    CHECK(words[i].subword.windows.cols() == kWindowDim);
    CHECK(words[i].subword.windows.allFinite());
    CHECK(words[i].lexical.vector.allFinite());
    CHECK(words[i].lexical.vector[kDuration] > 0);
    CHECK(words[i].lexical.vector[kPosition] >= 0);
    CHECK(words[i].lexical.vector[kPosition] <= 1);
  }
  const auto again = assemble_utterance(u.audio, u.meta.words, u.meta.speaker_id, stats);
  for (std::size_t i = 0; i < words.size(); ++i) {
    CHECK(again[i].subword.windows == words[i].subword.windows);
    CHECK(again[i].lexical.vector == words[i].lexical.vector);
  }
  CHECK(assemble_utterance(u.audio, {}, u.meta.speaker_id, stats).empty());
  CHECK_THROWS_AS(assemble_utterance(u.audio, {{"x", 0.0, u.audio.duration() + 1.0}}, "s", stats), DataError);
  CHECK_THROWS_AS(assemble_utterance(u.audio, {{"x", 0.3, 0.2}}, "s", stats), DataError);
}

TEST_CASE("feature selection for ablation") {
  const FeatureSelection all = FeatureSelection::all();
  CHECK(all.feature_count() == 60);
  CHECK(all.without(FeatureGroup::ZNorm).feature_count() == 30);
  CHECK(all.without(FeatureGroup::Energy).feature_count() == 60 - 22);
  CHECK(all.without(FeatureGroup::Frequency).feature_count() == 60 - 20);
  CHECK(all.without(FeatureGroup::Voicing).feature_count() == 60 - 6);
  CHECK(all.without(FeatureGroup::Lexical).feature_count() == 60 - 12);
  CHECK(all.without(FeatureGroup::Lexical).lexical.empty());
  for (const char* name : {"eng", "freq", "voc", "lex", "znorm"}) {
    CHECK(to_string(parse_feature_group(name)) == name);
  }
  CHECK_THROWS_AS(parse_feature_group("pitch"), ConfigError);
  CHECK(window_feature_names().size() == kWindowDim);
  CHECK(lexical_feature_names().size() == kLexicalDim);
}

TEST_CASE("feature dump") {
  const auto synth = generate_synth_corpus(1, 2);
  const auto& u = synth[0];
  const RawUtteranceFeatures raw = extract_raw_utterance(u.audio, u.meta.words, u.meta.speaker_id);
  const auto words = augment_utterance(raw, fit_speaker_stats({raw}));
  std::ostringstream os;
  write_feature_dump(os, u.meta.utterance_id, u.meta.words, words);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == kFeatureDumpHeader);
  std::size_t lines = 0;
  while (std::getline(is, line)) ++lines;
  std::size_t expected = 0;
  for (const WordFeatures& w : words) expected += 2 + static_cast<std::size_t>(w.subword.windows.rows());
  CHECK(lines == expected);
}
