#include "wordimp/checkpoint.hpp"

#include <fstream>

#include "wordimp/errors.hpp"

namespace wordimp {
namespace {

using nlohmann::json;

constexpr const char* kFormatTag = "wordimp-checkpoint";

json vec_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from_json(const json& j, Eigen::Index expected, const std::string& what) {
  const auto v = j.get<std::vector<double>>();
  if (expected >= 0 && static_cast<Eigen::Index>(v.size()) != expected) {
    throw DataError("checkpoint: " + what + " has " + std::to_string(v.size()) + " values, expected " +
                    std::to_string(expected));
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json moments_to_json(const SpeakerStats::Moments& m) {
  return {{"mean", vec_to_json(m.mean)}, {"std", vec_to_json(m.std)}};
}

SpeakerStats::Moments moments_from_json(const json& j, const std::string& who) {
  return {vec_from_json(j.at("mean"), kRawFeatureDim, who + " mean"),
          vec_from_json(j.at("std"), kRawFeatureDim, who + " std")};
}

json dsp_to_json(const DspConfig& d) {
  return {{"frame_s", d.frame_s},       {"hop_s", d.hop_s},
          {"fmin_hz", d.fmin_hz},       {"fmax_hz", d.fmax_hz},
          {"voicing_threshold", d.voicing_threshold},
          {"octave_cost", d.octave_cost}, {"band_lo_hz", d.band_lo_hz},
          {"band_hi_hz", d.band_hi_hz}, {"intensity_floor", d.intensity_floor},
          {"syllable_dip_db", d.syllable_dip_db}};
}

DspConfig dsp_from_json(const json& j) {
  DspConfig d;
  d.frame_s = j.at("frame_s").get<double>();
  d.hop_s = j.at("hop_s").get<double>();
  d.fmin_hz = j.at("fmin_hz").get<double>();
  d.fmax_hz = j.at("fmax_hz").get<double>();
  d.voicing_threshold = j.at("voicing_threshold").get<double>();
  d.octave_cost = j.at("octave_cost").get<double>();
  d.band_lo_hz = j.at("band_lo_hz").get<double>();
  d.band_hi_hz = j.at("band_hi_hz").get<double>();
  d.intensity_floor = j.at("intensity_floor").get<double>();
  d.syllable_dip_db = j.at("syllable_dip_db").get<double>();
  return d;
}

}  // namespace

json checkpoint_to_json(const ImportanceModel& model, const json& metadata) {
  const ModelConfig& c = model.labeler.config();
  json speakers = json::object();
  for (const auto& [id, m] : model.stats.speakers) speakers[id] = moments_to_json(m);

  json tensors = json::array();
  model.labeler.params().for_each([&](const Param& p) {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(p.value.size()));
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index k = 0; k < p.value.cols(); ++k) values.push_back(p.value(r, k));
    }
    tensors.push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"values", values}});
  });

  return {{"format", kFormatTag},
          {"version", kCheckpointVersion},
          {"config",
           {{"window_dim", c.window_dim},
            {"lexical_dim", c.lexical_dim},
            {"gru_hidden", c.gru_hidden},
            {"lstm_hidden", c.lstm_hidden},
            {"num_labels", c.num_labels},
            {"head", std::string(to_string(c.head))},
            {"seed", c.seed}}},
          {"assembly", {{"tau_s", model.assembly.tau_s}, {"hop_s", model.assembly.hop_s}, {"dsp", dsp_to_json(model.assembly.dsp)}}},
          {"features", {{"window", model.selection.window}, {"lexical", model.selection.lexical}}},
          {"speaker_stats", {{"global", moments_to_json(model.stats.global)}, {"speakers", speakers}}},
          {"scaler",
           {{"window_mean", vec_to_json(model.scaler.window_mean)},
            {"window_scale", vec_to_json(model.scaler.window_scale)},
            {"lexical_mean", vec_to_json(model.scaler.lexical_mean)},
            {"lexical_scale", vec_to_json(model.scaler.lexical_scale)}}},
          {"tensors", tensors},
          {"metadata", metadata}};
}

Checkpoint checkpoint_from_json(const json& doc) {
  try {
    if (doc.value("format", "") != kFormatTag) throw DataError("checkpoint: not a wordimp checkpoint");
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
    }
    const json& jc = doc.at("config");
    ModelConfig cfg;
    cfg.window_dim = jc.at("window_dim").get<int>();
    cfg.lexical_dim = jc.at("lexical_dim").get<int>();
    cfg.gru_hidden = jc.at("gru_hidden").get<int>();
    cfg.lstm_hidden = jc.at("lstm_hidden").get<int>();
    cfg.num_labels = jc.at("num_labels").get<int>();
    cfg.head = parse_head_kind(jc.at("head").get<std::string>());
    cfg.seed = jc.at("seed").get<std::uint64_t>();

    AssemblyConfig assembly;
    assembly.tau_s = doc.at("assembly").at("tau_s").get<double>();
    assembly.hop_s = doc.at("assembly").at("hop_s").get<double>();
    assembly.dsp = dsp_from_json(doc.at("assembly").at("dsp"));

    FeatureSelection sel;
    sel.window = doc.at("features").at("window").get<std::vector<int>>();
    sel.lexical = doc.at("features").at("lexical").get<std::vector<int>>();
    if (static_cast<int>(sel.window.size()) != cfg.window_dim ||
        static_cast<int>(sel.lexical.size()) != cfg.lexical_dim) {
      throw DataError("checkpoint: feature selection disagrees with model input dimensions");
    }
    for (int i : sel.window) if (i < 0 || i >= kWindowDim) throw DataError("checkpoint: bad window feature index");
    for (int i : sel.lexical) if (i < 0 || i >= kLexicalDim) throw DataError("checkpoint: bad lexical feature index");

    SpeakerStats stats;
    stats.global = moments_from_json(doc.at("speaker_stats").at("global"), "global stats");
    for (const auto& [id, m] : doc.at("speaker_stats").at("speakers").items()) {
      stats.speakers.emplace(id, moments_from_json(m, "speaker " + id));
    }

    const json& js = doc.at("scaler");
    InputScaler scaler{vec_from_json(js.at("window_mean"), cfg.window_dim, "scaler window_mean"),
                       vec_from_json(js.at("window_scale"), cfg.window_dim, "scaler window_scale"),
                       vec_from_json(js.at("lexical_mean"), cfg.lexical_dim, "scaler lexical_mean"),
                       vec_from_json(js.at("lexical_scale"), cfg.lexical_dim, "scaler lexical_scale")};

    ModelParameters params(cfg);
    const json& tensors = doc.at("tensors");
    std::size_t count = 0;
    params.for_each([&](const Param&) { ++count; });
    if (tensors.size() != count) {
      throw DataError("checkpoint: " + std::to_string(tensors.size()) + " tensors, expected " +
                      std::to_string(count));
    }
    std::size_t i = 0;
    params.for_each([&](Param& p) {
      const json& t = tensors.at(i++);
      const auto name = t.at("name").get<std::string>();
      const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
      if (name != p.name) throw DataError("checkpoint: expected tensor " + p.name + ", found " + name);
      if (shape.size() != 2 || shape[0] != p.value.rows() || shape[1] != p.value.cols()) {
        throw DataError("checkpoint: tensor " + name + " shape mismatch");
      }
      const auto values = t.at("values").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(values.size()) != p.value.size()) {
        throw DataError("checkpoint: tensor " + name + " has the wrong number of values");
      }
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.value.cols(); ++c) p.value(r, c) = values[k++];
      }
    });

    return {ImportanceModel{assembly, sel, std::move(stats), std::move(scaler),
                            SequenceLabeler(cfg, std::move(params))},
            doc.value("metadata", json::object())};
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: malformed document: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ImportanceModel& model,
                     const json& metadata) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << checkpoint_to_json(model, metadata).dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open checkpoint");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": not valid JSON: " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace wordimp
