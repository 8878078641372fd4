#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "test_support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using wordimp::testing::file_checksum;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "wordimp_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the CLI inside the work directory; returns its exit status.
int cli(const std::string& args) {
  const std::string cmd = "cd '" + work_dir().string() + "' && '" WORDIMP_CLI_PATH "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json(const std::string& rel) {
  std::ifstream in(work_dir() / rel);
  return json::parse(in);
}

void ensure_corpus() {
  static const bool done = [] {
    REQUIRE(cli("synth-data --out syn --n 8 --seed 3") == 0);
    return true;
  }();
  (void)done;
}

}  // namespace

TEST_CASE("synth-data and extract") {
  ensure_corpus();
  CHECK(fs::exists(work_dir() / "syn" / "corpus.jsonl"));
  REQUIRE(cli("extract --corpus syn/corpus.jsonl --out feats") == 0);
  std::size_t dumps = 0;
  for (const auto& e : fs::directory_iterator(work_dir() / "feats")) dumps += e.path().extension() == ".tsv";
  CHECK(dumps == 8);

  REQUIRE(cli("extract --corpus syn/corpus.jsonl --out feats2 --jobs 3") == 0);
  for (const auto& e : fs::directory_iterator(work_dir() / "feats")) {
    CHECK(file_checksum(e.path()) == file_checksum(work_dir() / "feats2" / e.path().filename()));
  }
}

TEST_CASE("train, evaluate, predict and align-eval") {
  ensure_corpus();
  REQUIRE(cli("train --corpus syn/corpus.jsonl --out run --head ordinal --seed 1 --max-epochs 3") == 0);
  CHECK(fs::exists(work_dir() / "run" / "checkpoint.json"));

  std::ifstream log(work_dir() / "run" / "train_log.jsonl");
  std::string line;
  int epochs = 0;
  bool provenance = false;
  while (std::getline(log, line)) {
    const json j = json::parse(line);
    if (j.at("type") == "provenance") {
      provenance = true;
      for (const auto& id : j.at("dev")) {
        const auto& fitted = j.at("speaker_stats_fitted_on");
        CHECK(std::find(fitted.begin(), fitted.end(), id) == fitted.end());
      }
    }
    if (j.at("type") == "epoch") {
      ++epochs;
      CHECK(j.contains("dev_rms"));
    }
  }
  CHECK(provenance);
  CHECK(epochs >= 1);

  REQUIRE(cli("evaluate --model run/checkpoint.json --corpus syn/corpus.jsonl --out eval.json") == 0);
  const json metrics = read_json("run/metrics.json"), eval = read_json("eval.json");
  CHECK(eval.at("rms") == metrics.at("rms"));
  CHECK(eval.at("acc") == metrics.at("acc"));

  REQUIRE(cli("predict --model run/checkpoint.json --corpus syn/corpus.jsonl --out pred.jsonl") == 0);
  std::ifstream pred(work_dir() / "pred.jsonl");
  int records = 0;
  while (std::getline(pred, line)) ++records;
  CHECK(records == 8);

  {
    std::ifstream corpus(work_dir() / "syn" / "corpus.jsonl");
    std::ofstream hyp(work_dir() / "hyp.jsonl");
    while (std::getline(corpus, line)) {
      const json r = json::parse(line);
      json tokens = json::array();
      for (const auto& w : r.at("words")) tokens.push_back(w.at("token"));
      hyp << json{{"utterance_id", r.at("utterance_id")}, {"hyp_tokens", tokens}}.dump() << "\n";
    }
  }
  REQUIRE(cli("align-eval --model run/checkpoint.json --corpus syn/corpus.jsonl --hyp hyp.jsonl --out align.json") == 0);
  const json align = read_json("align.json");
  CHECK(align.at("wer") == 0.0);
  CHECK(align.at("acc") == eval.at("acc"));
  CHECK(align.at("rms") == eval.at("rms"));
}

TEST_CASE("ablate reports feature dimensions") {
  ensure_corpus();
  REQUIRE(cli("ablate --corpus syn/corpus.jsonl --out abl --group znorm --max-epochs 1") == 0);
  const json report = read_json("abl/ablation.json");
  CHECK(report.at("rows").at(0).at("feature_dims").at("total") == 30);
}

TEST_CASE("exit codes") {
  ensure_corpus();
  CHECK(cli("--help") == 0);
  CHECK(cli("") == 2);
  CHECK(cli("train --corpus missing.jsonl --out x") == 2);
  CHECK(cli("train --corpus syn/corpus.jsonl --out x --head bogus") == 2);
  CHECK(cli("synth-data --out n --noisy") == 2);
  CHECK(cli("evaluate --model syn/corpus.jsonl --corpus syn/corpus.jsonl") == 3);
  {
    std::ofstream(work_dir() / "bad.jsonl")
        << R"({"utterance_id":"u","speaker_id":"s","audio_path":"nowhere.wav","words":[{"token":"a","start_s":0,"end_s":0.2,"score":0.5}]})"
        << "\n";
  }
  CHECK(cli("extract --corpus bad.jsonl --out f") == 3);
}
