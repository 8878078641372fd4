#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <vector>

#include "test_support.hpp"
#include "wordimp/checkpoint.hpp"
#include "wordimp/errors.hpp"
#include "wordimp/training.hpp"

using namespace wordimp;
using namespace wordimp::testing;

namespace {

struct Fixture {
  std::vector<Example> examples;
  ImportanceModel model;
};

Fixture trained(HeadKind head, const FeatureSelection& sel = FeatureSelection::all()) {
  std::vector<Example> examples;
  for (const SynthUtterance& s : generate_synth_corpus(6, 8)) {
    examples.push_back({s.meta.utterance_id, s.meta.words,
                          extract_raw_utterance(s.audio, s.meta.words, s.meta.speaker_id), gold_labels(s.meta)});
  }
  TrainConfig cfg;
  cfg.head = head;
  cfg.gru_hidden = 6;
  cfg.lstm_hidden = 10;
  cfg.max_epochs = 2;
  cfg.features = sel;
  const std::vector<Example> tr(examples.begin(), examples.begin() + 5), dev(examples.begin() + 5, examples.end());
  ImportanceModel model = train(tr, dev, cfg).model;
  return {std::move(examples), std::move(model)};
}

std::vector<Eigen::MatrixXd> tensors(const ImportanceModel& m) {
  std::vector<Eigen::MatrixXd> out;
  m.labeler.params().for_each([&](const Param& p) { out.push_back(p.value); });
  return out;
}

}  // namespace

TEST_CASE("checkpoint round trip is lossless") {
  for (HeadKind head : {HeadKind::Softmax, HeadKind::Ordinal, HeadKind::Crf}) {
    CAPTURE(to_string(head));
    const Fixture f = trained(head, FeatureSelection::all().without(FeatureGroup::Voicing));
    const auto path = std::filesystem::temp_directory_path() / "wordimp_ckpt_roundtrip.json";
    save_checkpoint(path, f.model, {{"seed", 1}});
    const Checkpoint c = load_checkpoint(path);
    CHECK(c.metadata.at("seed") == 1);
    CHECK(c.model.labeler.config().head == head);
    CHECK(c.model.selection == f.model.selection);
    CHECK(tensors(c.model) == tensors(f.model));
    CHECK(c.model.scaler.window_mean == f.model.scaler.window_mean);
    CHECK(c.model.stats.global.std == f.model.stats.global.std);
    CHECK(c.model.stats.speakers.size() == f.model.stats.speakers.size());
    for (const Example& e : f.examples) CHECK(c.model.predict(e.raw) == f.model.predict(e.raw));

    save_checkpoint(path.string() + ".2", c.model, c.metadata);
    CHECK(file_checksum(path) == file_checksum(path.string() + ".2"));
  }
}

TEST_CASE("checkpoint validation") {
  const Fixture f = trained(HeadKind::Ordinal);
  const nlohmann::json good = checkpoint_to_json(f.model, {});
  CHECK_NOTHROW(checkpoint_from_json(good));

  nlohmann::json bad = good;
  bad["version"] = kCheckpointVersion + 1;
  CHECK_THROWS_AS(checkpoint_from_json(bad), DataError);

  bad = good;
  bad["format"] = "something-else";
  CHECK_THROWS_AS(checkpoint_from_json(bad), DataError);

  bad = good;
  bad["tensors"][0]["shape"][0] = bad["tensors"][0]["shape"][0].get<int>() + 1;
  CHECK_THROWS_AS(checkpoint_from_json(bad), DataError);

  bad = good;
  bad["tensors"][1]["values"].erase(0);
  CHECK_THROWS_AS(checkpoint_from_json(bad), DataError);

  bad = good;
  bad["config"]["lstm_hidden"] = 7;
  CHECK_THROWS_AS(checkpoint_from_json(bad), DataError);

  bad = good;
  bad.erase("scaler");
  CHECK_THROWS_AS(checkpoint_from_json(bad), DataError);

  const auto junk = std::filesystem::temp_directory_path() / "wordimp_ckpt_junk.json";
  std::ofstream(junk) << "{ nope";
  CHECK_THROWS_AS(load_checkpoint(junk), DataError);
  CHECK_THROWS_AS(load_checkpoint(junk.string() + ".missing"), DataError);
}
