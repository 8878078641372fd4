#include "wordimp/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "wordimp/errors.hpp"

namespace wordimp {
namespace {

using nlohmann::json;

template <typename T>
T field(const json& rec, const char* key, std::size_t line) {
  if (!rec.contains(key)) {
    throw DataError("line " + std::to_string(line) + ": missing field '" + key + "'");
  }
  try {
    return rec.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataError("line " + std::to_string(line) + ": field '" + key + "' has the wrong type");
  }
}

std::vector<std::string> lines_of(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

json parse_line(const std::string& text, const std::filesystem::path& path, std::size_t line) {
  try {
    json rec = json::parse(text);
    if (!rec.is_object()) throw DataError("");
    return rec;
  } catch (const std::exception&) {
    throw DataError(path.string() + ": line " + std::to_string(line) + ": not a JSON object");
  }
}

}  // namespace

void validate_utterance(const LabeledUtterance& utt) {
  if (utt.utterance_id.empty()) throw DataError("empty utterance_id");
  if (utt.scores.size() != utt.words.size()) {
    throw DataError(utt.utterance_id + ": " + std::to_string(utt.words.size()) + " words but " +
                    std::to_string(utt.scores.size()) + " scores");
  }
  for (std::size_t i = 0; i < utt.words.size(); ++i) {
    const WordTiming& w = utt.words[i];
    const std::string where = utt.utterance_id + " word " + std::to_string(i) + " ('" + w.token + "')";
    if (!(utt.scores[i] >= 0.0 && utt.scores[i] <= 1.0)) {
      throw DataError(where + ": score " + std::to_string(utt.scores[i]) + " outside [0, 1]");
    }
    if (!(w.start >= 0.0) || !(w.start < w.end)) {
      throw DataError(where + ": invalid interval [" + std::to_string(w.start) + ", " +
                      std::to_string(w.end) + "]");
    }
    if (i > 0 && w.start < utt.words[i - 1].end) {
      throw DataError(where + ": overlaps or precedes the previous word");
    }
  }
}

std::vector<LabeledUtterance> load_corpus(const std::filesystem::path& path) {
  const std::vector<std::string> lines = lines_of(path);
  const std::filesystem::path base = path.parent_path();
  std::vector<LabeledUtterance> corpus;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (blank(lines[n])) continue;
    const std::size_t line = n + 1;
    const json rec = parse_line(lines[n], path, line);
    try {
      LabeledUtterance utt;
      utt.utterance_id = field<std::string>(rec, "utterance_id", line);
      utt.speaker_id = field<std::string>(rec, "speaker_id", line);
      std::filesystem::path audio = field<std::string>(rec, "audio_path", line);
      utt.audio_path = audio.is_absolute() ? audio : base / audio;
      const json words = field<json>(rec, "words", line);
      if (!words.is_array()) throw DataError("line " + std::to_string(line) + ": 'words' is not a list");
      for (const json& w : words) {
        if (!w.is_object()) throw DataError("line " + std::to_string(line) + ": word is not an object");
        utt.words.push_back({field<std::string>(w, "token", line), field<double>(w, "start_s", line),
                             field<double>(w, "end_s", line)});
        utt.scores.push_back(field<double>(w, "score", line));
      }
      validate_utterance(utt);
      corpus.push_back(std::move(utt));
    } catch (const DataError& e) {
      const std::string what = e.what();
      if (what.rfind("line ", 0) == 0) throw DataError(path.string() + ": " + what);
      throw DataError(path.string() + ": line " + std::to_string(line) + ": " + what);
    }
  }
  return corpus;
}

void write_corpus(const std::filesystem::path& path, const std::vector<LabeledUtterance>& corpus) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  const std::filesystem::path base = path.parent_path();
  for (const LabeledUtterance& utt : corpus) {
    json words = json::array();
    for (std::size_t i = 0; i < utt.words.size(); ++i) {
      words.push_back({{"token", utt.words[i].token},
                       {"start_s", utt.words[i].start},
                       {"end_s", utt.words[i].end},
                       {"score", utt.scores[i]}});
    }
    std::filesystem::path audio = utt.audio_path;
    if (!base.empty()) {
      // Both sides absolute so relative inputs resolve against the working directory.
      const auto rel = std::filesystem::absolute(audio).lexically_normal().lexically_relative(
          std::filesystem::absolute(base).lexically_normal());
      if (!rel.empty() && *rel.begin() != "..") audio = rel;
    }
    const json rec = {{"utterance_id", utt.utterance_id},
                      {"speaker_id", utt.speaker_id},
                      {"audio_path", audio.generic_string()},
                      {"words", words}};
    out << rec.dump() << '\n';
  }
}

CorpusSplit split_corpus(const std::vector<LabeledUtterance>& corpus, const SplitFractions& f,
                         std::uint64_t seed) {
  if (corpus.size() < 3) {
    throw DataError("split_corpus: need at least 3 utterances, got " + std::to_string(corpus.size()));
  }
  if (f.train < 0 || f.dev < 0 || f.test < 0 || std::abs(f.train + f.dev + f.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  const std::size_t n = corpus.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto count = [n](double frac) {
    const auto c = static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9));
    return frac > 0.0 ? std::max<std::size_t>(1, c) : c;
  };
  const std::size_t n_dev = count(f.dev);
  const std::size_t n_test = count(f.test);
  const std::size_t n_train = n - n_dev - n_test;

  CorpusSplit s;
  for (std::size_t i = 0; i < n; ++i) {
    const LabeledUtterance& u = corpus[order[i]];
    if (i < n_train) s.train.push_back(u);
    else if (i < n_train + n_dev) s.dev.push_back(u);
    else s.test.push_back(u);
  }
  return s;
}

std::vector<AsrHypothesis> load_hypotheses(const std::filesystem::path& path) {
  const std::vector<std::string> lines = lines_of(path);
  std::vector<AsrHypothesis> out;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (blank(lines[n])) continue;
    const std::size_t line = n + 1;
    const json rec = parse_line(lines[n], path, line);
    try {
      AsrHypothesis h;
      h.utterance_id = field<std::string>(rec, "utterance_id", line);
      h.tokens = field<std::vector<std::string>>(rec, "hyp_tokens", line);
      if (rec.contains("hyp_word_times") && !rec.at("hyp_word_times").is_null()) {
        const auto times = field<std::vector<std::array<double, 2>>>(rec, "hyp_word_times", line);
        if (times.size() != h.tokens.size()) {
          throw DataError("line " + std::to_string(line) + ": hyp_word_times length differs from hyp_tokens");
        }
        std::vector<WordTiming> wt;
        for (std::size_t i = 0; i < times.size(); ++i) wt.push_back({h.tokens[i], times[i][0], times[i][1]});
        h.word_times = std::move(wt);
      }
      out.push_back(std::move(h));
    } catch (const DataError& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace wordimp
