#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wordimp/checkpoint.hpp"
#include "wordimp/corpus.hpp"
#include "wordimp/dsp.hpp"
#include "wordimp/errors.hpp"
#include "wordimp/evaluation.hpp"
#include "wordimp/features.hpp"
#include "wordimp/synth.hpp"
#include "wordimp/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wordimp;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

struct Common {
  std::uint64_t seed = 1;
  int jobs = 1;
  double tau = 0.050;
  double hop = 0.040;
};

struct TrainOptions {
  std::string corpus, out, head = "ordinal", group = "none";
  int max_epochs = 100, patience = 7, trials = 1;
  double lr = 0.001;
};

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw DataError(path.string() + ": write failed");
}

// Writes to `out` when given, else stdout.
void emit(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
  }
}

AssemblyConfig assembly_config(const Common& c) {
  AssemblyConfig a;
  a.tau_s = c.tau;
  a.hop_s = c.hop;
  return a;
}

FeatureSelection selection_for(const std::string& group) {
  if (group == "none") return FeatureSelection::all();
  return FeatureSelection::all().without(parse_feature_group(group));
}

json feature_dims(const FeatureSelection& sel) {
  return {{"window", sel.window.size()}, {"lexical", sel.lexical.size()}, {"total", sel.feature_count()}};
}

std::vector<std::string> utterance_ids(const std::vector<LabeledUtterance>& v) {
  std::vector<std::string> out;
  for (const LabeledUtterance& u : v) out.push_back(u.utterance_id);
  return out;
}

SplitFractions fractions_from(const json& j) {
  return {j.at("train").get<double>(), j.at("dev").get<double>(), j.at("test").get<double>()};
}

json fractions_json(const SplitFractions& f) { return {{"train", f.train}, {"dev", f.dev}, {"test", f.test}}; }

struct SplitExamples {
  CorpusSplit split;
  std::vector<Example> train, dev, test;
};

SplitExamples prepare_split(const std::string& corpus_path, const Common& c) {
  const auto corpus = load_corpus(corpus_path);
  SplitExamples s;
  s.split = split_corpus(corpus, SplitFractions{}, c.seed + kSplitSeedOffset);
  const AssemblyConfig a = assembly_config(c);
  s.train = extract_examples(s.split.train, a, c.jobs);
  s.dev = extract_examples(s.split.dev, a, c.jobs);
  s.test = extract_examples(s.split.test, a, c.jobs);
  return s;
}

struct TrialOutcome {
  Metrics test;
  int best_epoch = 0;
};

// Trains one model; trial k reuses the base split and offsets the model seed by k.
TrialOutcome run_trial(const SplitExamples& data, const Common& c, const TrainOptions& o,
                       const FeatureSelection& sel, int trial, const fs::path& dir) {
  TrainConfig cfg;
  cfg.seed = c.seed + static_cast<std::uint64_t>(trial);
  cfg.head = parse_head_kind(o.head);
  cfg.assembly = assembly_config(c);
  cfg.features = sel;
  cfg.max_epochs = o.max_epochs;
  cfg.patience = o.patience;
  cfg.lr = o.lr;
  cfg.validate();

  fs::create_directories(dir);
  std::ostringstream log;
  log << json{{"type", "provenance"},
              {"speaker_stats_fitted_on", utterance_ids(data.split.train)},
              {"input_scaler_fitted_on", utterance_ids(data.split.train)},
              {"dev", utterance_ids(data.split.dev)},
              {"test", utterance_ids(data.split.test)}}
             .dump()
      << "\n";

  const TrainResult r = train(data.train, data.dev, cfg, [&](const EpochRecord& rec) {
    json j = to_json(rec);
    j["type"] = "epoch";
    log << j.dump() << "\n";
    std::fprintf(stderr, "[%s trial %d] epoch %d loss %.5f train_acc %.2f dev_rms %.2f%s\n", o.head.c_str(),
                 trial, rec.epoch, rec.train_loss, rec.train_acc, rec.dev.rms, rec.improved ? " *" : "");
  });
  if (r.fitted_on != utterance_ids(data.split.train)) {
    throw InternalError("speaker statistics were fitted on data outside the training split");
  }

  TrialOutcome out{evaluate(r.model, data.test, c.jobs), r.best_epoch};
  log << json{{"type", "result"}, {"best_epoch", r.best_epoch}, {"epochs_run", r.log.size()}}.dump() << "\n";

  const json meta = {{"split_seed", c.seed + kSplitSeedOffset},
                     {"fractions", fractions_json(SplitFractions{})},
                     {"seed", cfg.seed},
                     {"trial", trial},
                     {"head", o.head},
                     {"group", o.group},
                     {"best_epoch", r.best_epoch}};
  save_checkpoint(dir / "checkpoint.json", r.model, meta);
  write_text(dir / "train_log.jsonl", log.str());

  json m = to_json(out.test);
  m["split"] = "test";
  m["best_epoch"] = r.best_epoch;
  m["feature_dims"] = feature_dims(sel);
  write_text(dir / "metrics.json", m.dump(2) + "\n");
  return out;
}

json mean_metrics(const std::vector<TrialOutcome>& trials) {
  double acc = 0, f1 = 0, rms = 0;
  json per = json::array();
  for (const TrialOutcome& t : trials) {
    acc += t.test.acc;
    f1 += t.test.macro_f1;
    rms += t.test.rms;
    per.push_back(to_json(t.test));
  }
  const double n = static_cast<double>(trials.size());
  return {{"trials", trials.size()}, {"acc", acc / n}, {"macro_f1", f1 / n}, {"rms", rms / n}, {"per_trial", per}};
}

std::vector<TrialOutcome> run_trials(const SplitExamples& data, const Common& c, const TrainOptions& o,
                                     const FeatureSelection& sel, const fs::path& dir) {
  if (o.trials < 1) throw ConfigError("--trials must be at least 1");
  std::vector<TrialOutcome> out;
  for (int t = 0; t < o.trials; ++t) {
    out.push_back(run_trial(data, c, o, sel, t, o.trials == 1 ? dir : dir / ("trial_" + std::to_string(t))));
  }
  return out;
}

// --- subcommands ----------------------------------------------------------

void cmd_synth(const std::string& out, int n, std::uint64_t seed, bool noisy, std::optional<double> snr) {
  if (n < 1) throw ConfigError("--n must be at least 1");
  if (noisy && !snr) throw ConfigError("--noisy requires --snr-db");
  if (!noisy && snr) throw ConfigError("--snr-db only applies with --noisy");
  const auto corpus = write_synth_corpus(out, n, seed, noisy ? snr : std::nullopt);
  std::fprintf(stderr, "wrote %zu utterances to %s\n", corpus.size(), (fs::path(out) / "corpus.jsonl").c_str());
}

void cmd_extract(const std::string& corpus_path, const std::string& out, const Common& c, bool dump_frames) {
  require_file(corpus_path, "corpus");
  const auto corpus = load_corpus(corpus_path);
  const AssemblyConfig a = assembly_config(c);
  subword_windows({"", 0.0, 1.0}, a.tau_s, a.hop_s);
  fs::create_directories(out);

  std::vector<std::string> failures(corpus.size());
  parallel_for(corpus.size(), c.jobs, [&](std::size_t i) {
    const LabeledUtterance& u = corpus[i];
    try {
      const AudioBuffer audio = load_wav(u.audio_path);
      const RawUtteranceFeatures raw = extract_raw_utterance(audio, u.words, u.speaker_id, a);
      // Dumps are per utterance, so z-scores use that utterance's own speaker statistics.
      const auto words = augment_utterance(raw, fit_speaker_stats({raw}));
      std::ostringstream os;
      write_feature_dump(os, u.utterance_id, u.words, words);
      write_text(fs::path(out) / (u.utterance_id + ".features.tsv"), os.str());
      if (dump_frames) {
        std::ostringstream fos;
        dump_frame_track(fos, compute_frame_track(audio, a.dsp));
        write_text(fs::path(out) / (u.utterance_id + ".frames.tsv"), fos.str());
      }
    } catch (const Error& e) {
      failures[i] = "utterance " + u.utterance_id + ": " + e.what();
    }
  });
  std::size_t failed = 0;
  for (const std::string& f : failures) {
    if (f.empty()) continue;
    std::fprintf(stderr, "error: %s\n", f.c_str());
    ++failed;
  }
  if (failed) throw DataError(std::to_string(failed) + " of " + std::to_string(corpus.size()) + " utterances failed");
  std::fprintf(stderr, "extracted %zu utterances to %s\n", corpus.size(), out.c_str());
}

void cmd_train(const TrainOptions& o, const Common& c) {
  require_file(o.corpus, "corpus");
  parse_head_kind(o.head);
  const FeatureSelection sel = selection_for(o.group);
  const SplitExamples data = prepare_split(o.corpus, c);
  const auto trials = run_trials(data, c, o, sel, o.out);
  if (trials.size() > 1) write_text(fs::path(o.out) / "summary.json", mean_metrics(trials).dump(2) + "\n");
  const Metrics& m = trials.front().test;
  std::fprintf(stderr, "test acc %.2f macro_f1 %.2f rms %.2f\n", m.acc, m.macro_f1, m.rms);
}

struct LoadedModel {
  Checkpoint ckpt;
  std::vector<LabeledUtterance> utterances;
};

LoadedModel load_model_and_split(const std::string& model, const std::string& corpus_path, const std::string& split) {
  require_file(model, "model");
  require_file(corpus_path, "corpus");
  if (split != "all" && split != "train" && split != "dev" && split != "test") {
    throw ConfigError("--split must be one of all, train, dev, test");
  }
  LoadedModel out{load_checkpoint(model), load_corpus(corpus_path)};
  if (split == "all") return out;
  const json& meta = out.ckpt.metadata;
  if (!meta.contains("split_seed") || !meta.contains("fractions")) {
    throw DataError("checkpoint has no split metadata; use --split all");
  }
  const CorpusSplit s =
      split_corpus(out.utterances, fractions_from(meta.at("fractions")), meta.at("split_seed").get<std::uint64_t>());
  out.utterances = split == "train" ? s.train : split == "dev" ? s.dev : s.test;
  return out;
}

void cmd_evaluate(const std::string& model, const std::string& corpus, const std::string& split,
                  const std::string& out, int jobs) {
  const LoadedModel lm = load_model_and_split(model, corpus, split);
  const auto examples = extract_examples(lm.utterances, lm.ckpt.model.assembly, jobs);
  json j = to_json(evaluate(lm.ckpt.model, examples, jobs));
  j["split"] = split;
  emit(out, j.dump(2) + "\n");
}

void cmd_predict(const std::string& model, const std::string& corpus, const std::string& out, int jobs) {
  const LoadedModel lm = load_model_and_split(model, corpus, "all");
  const auto examples = extract_examples(lm.utterances, lm.ckpt.model.assembly, jobs);
  const auto preds = predict_all(lm.ckpt.model, examples, jobs);
  std::ostringstream os;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    json words = json::array();
    for (std::size_t t = 0; t < preds[i].size(); ++t) {
      words.push_back({{"token", examples[i].words[t].token}, {"label", std::string(to_string(preds[i][t]))}});
    }
    os << json{{"utterance_id", examples[i].utterance_id}, {"words", words}}.dump() << "\n";
  }
  emit(out, os.str());
}

void cmd_align_eval(const std::string& model, const std::string& corpus, const std::string& hyp_path,
                    const std::string& split, const std::string& out, bool exclude_insertions, int jobs) {
  require_file(hyp_path, "hypothesis file");
  const LoadedModel lm = load_model_and_split(model, corpus, split);
  std::map<std::string, AsrHypothesis> hyps;
  for (AsrHypothesis& h : load_hypotheses(hyp_path)) hyps.emplace(h.utterance_id, std::move(h));

  const ImportanceModel& m = lm.ckpt.model;
  const auto examples = extract_examples(lm.utterances, m.assembly, jobs);
  std::vector<LabelPairs> pairs(examples.size());
  std::vector<std::size_t> edits(examples.size()), ref_len(examples.size());
  parallel_for(examples.size(), jobs, [&](std::size_t i) {
    const Example& ex = examples[i];
    const auto it = hyps.find(ex.utterance_id);
    if (it == hyps.end()) throw DataError("no hypothesis for utterance " + ex.utterance_id);
    const AsrHypothesis& h = it->second;
    std::vector<std::string> ref;
    for (const WordTiming& w : ex.words) ref.push_back(w.token);
    const auto ops = align_hypothesis(ref, h.tokens);

    std::vector<Label> hyp_pred(h.tokens.size(), Label::LI);
    if (h.word_times) {
      const LabeledUtterance& u = lm.utterances[i];
      const AudioBuffer audio = load_wav(u.audio_path);
      try {
        hyp_pred = m.predict(extract_raw_utterance(audio, *h.word_times, u.speaker_id, m.assembly));
      } catch (const DataError& e) {
        throw DataError("utterance " + ex.utterance_id + " hypothesis: " + e.what());
      }
    } else {
      // Without hypothesis timings, aligned words take the prediction of their reference word.
      const std::vector<Label> ref_pred = m.predict(ex.raw);
      for (const AlignmentOp& op : ops) {
        if (op.ref && op.hyp) hyp_pred[*op.hyp] = ref_pred[*op.ref];
      }
    }
    pairs[i] = project_labels(ops, ex.gold, hyp_pred, !exclude_insertions);
    edits[i] = edit_cost(ops);
    ref_len[i] = reference_length(ops);
  });

  ConfusionMatrix cm;
  std::size_t total_edits = 0, total_ref = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t k = 0; k < pairs[i].gold.size(); ++k) cm.add(pairs[i].gold[k], pairs[i].pred[k]);
    total_edits += edits[i];
    total_ref += ref_len[i];
  }
  if (total_ref == 0) throw DataError("no reference words to evaluate");
  Metrics metrics = metrics_from_confusion(cm);
  metrics.wer = static_cast<double>(total_edits) / static_cast<double>(total_ref);
  json j = to_json(metrics);
  j["split"] = split;
  j["insertions_counted"] = !exclude_insertions;
  emit(out, j.dump(2) + "\n");
}

void cmd_ablate(TrainOptions o, const Common& c) {
  require_file(o.corpus, "corpus");
  parse_head_kind(o.head);
  std::vector<std::string> groups;
  if (o.group == "all") {
    groups = {"none", "eng", "freq", "voc", "lex", "znorm"};
  } else {
    selection_for(o.group);
    groups = {o.group};
  }
  const SplitExamples data = prepare_split(o.corpus, c);
  json rows = json::array();
  for (const std::string& g : groups) {
    o.group = g;
    const FeatureSelection sel = selection_for(g);
    const auto trials = run_trials(data, c, o, sel, fs::path(o.out) / g);
    json row = mean_metrics(trials);
    row["group"] = g;
    row["feature_dims"] = feature_dims(sel);
    rows.push_back(row);
    std::fprintf(stderr, "without %-5s acc %.2f macro_f1 %.2f rms %.2f (%d features)\n", g.c_str(),
                 row["acc"].get<double>(), row["macro_f1"].get<double>(), row["rms"].get<double>(),
                 sel.feature_count());
  }
  write_text(fs::path(o.out) / "ablation.json", json{{"head", o.head}, {"rows", rows}}.dump(2) + "\n");
}

void add_common(CLI::App* sub, Common& c, bool windows, bool jobs) {
  sub->add_option("--seed", c.seed, "Base random seed")->capture_default_str();
  if (jobs) sub->add_option("--jobs", c.jobs, "Worker threads over utterances")->capture_default_str()->check(CLI::PositiveNumber);
  if (windows) {
    sub->add_option("--tau", c.tau, "Sub-word window length (s)")->capture_default_str();
    sub->add_option("--hop", c.hop, "Sub-word window hop (s)")->capture_default_str();
  }
}

void add_training(CLI::App* sub, TrainOptions& o) {
  sub->add_option("--corpus", o.corpus, "Corpus JSONL")->required();
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_option("--head", o.head, "Projection head")
      ->check(CLI::IsMember({"softmax", "ordinal", "crf"}))
      ->capture_default_str();
  sub->add_option("--max-epochs", o.max_epochs, "Upper bound on epochs")->capture_default_str();
  sub->add_option("--patience", o.patience, "Epochs without dev RMS improvement before stopping")->capture_default_str();
  sub->add_option("--trials", o.trials, "Independent training runs (model seed offset per trial)")->capture_default_str();
  sub->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
}

int run(int argc, char** argv) {
  CLI::App app{"Word importance labeling from prosody"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic labeled corpus with WAV files");
  std::string synth_out;
  int synth_n = 50;
  bool noisy = false;
  std::optional<double> snr;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--n", synth_n, "Number of utterances")->capture_default_str();
  synth->add_flag("--noisy", noisy, "Add white noise to every utterance");
  synth->add_option("--snr-db", snr, "Signal-to-noise ratio for --noisy (dB)");
  add_common(synth, common, false, false);

  auto* extract = app.add_subcommand("extract", "Write per-word feature dumps for a corpus");
  std::string ex_corpus, ex_out;
  bool dump_frames = false;
  extract->add_option("--corpus", ex_corpus, "Corpus JSONL")->required();
  extract->add_option("--out", ex_out, "Output directory")->required();
  extract->add_flag("--dump-frames", dump_frames, "Also write the frame-level contours");
  add_common(extract, common, true, true);

  auto* train_cmd = app.add_subcommand("train", "Train a model and report test metrics");
  TrainOptions train_opts;
  add_training(train_cmd, train_opts);
  train_cmd->add_option("--group", train_opts.group, "Feature group to leave out")
      ->check(CLI::IsMember({"none", "eng", "freq", "voc", "lex", "znorm"}))
      ->capture_default_str();
  add_common(train_cmd, common, true, true);

  std::string model, corpus, split = "test", out, hyp;
  bool exclude_insertions = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a trained model on a corpus split");
  eval_cmd->add_option("--model", model, "Checkpoint file")->required();
  eval_cmd->add_option("--corpus", corpus, "Corpus JSONL")->required();
  eval_cmd->add_option("--split", split, "all, train, dev or test (split recorded in the checkpoint)")->capture_default_str();
  eval_cmd->add_option("--out", out, "Report path (default stdout)");
  add_common(eval_cmd, common, false, true);

  auto* predict_cmd = app.add_subcommand("predict", "Label every word of a corpus");
  predict_cmd->add_option("--model", model, "Checkpoint file")->required();
  predict_cmd->add_option("--corpus", corpus, "Corpus JSONL")->required();
  predict_cmd->add_option("--out", out, "Output JSONL (default stdout)");
  add_common(predict_cmd, common, false, true);

  auto* align_cmd = app.add_subcommand("align-eval", "Score predictions on ASR hypotheses against reference labels");
  align_cmd->add_option("--model", model, "Checkpoint file")->required();
  align_cmd->add_option("--corpus", corpus, "Reference corpus JSONL")->required();
  align_cmd->add_option("--hyp", hyp, "ASR hypothesis JSONL")->required();
  align_cmd->add_option("--split", split, "all, train, dev or test")->capture_default_str();
  align_cmd->add_option("--out", out, "Report path (default stdout)");
  align_cmd->add_flag("--exclude-insertions", exclude_insertions, "Leave inserted words out of the metrics");
  add_common(align_cmd, common, false, true);

  auto* ablate_cmd = app.add_subcommand("ablate", "Retrain with one feature group removed");
  TrainOptions ablate_opts;
  ablate_opts.group = "all";
  add_training(ablate_cmd, ablate_opts);
  ablate_cmd->add_option("--group", ablate_opts.group, "Group to remove, or all for every group plus the baseline")
      ->check(CLI::IsMember({"none", "all", "eng", "freq", "voc", "lex", "znorm"}))
      ->capture_default_str();
  add_common(ablate_cmd, common, true, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*synth) cmd_synth(synth_out, synth_n, common.seed, noisy, snr);
  if (*extract) cmd_extract(ex_corpus, ex_out, common, dump_frames);
  if (*train_cmd) cmd_train(train_opts, common);
  if (*eval_cmd) cmd_evaluate(model, corpus, split, out, common.jobs);
  if (*predict_cmd) cmd_predict(model, corpus, out, common.jobs);
  if (*align_cmd) cmd_align_eval(model, corpus, hyp, split, out, exclude_insertions, common.jobs);
  if (*ablate_cmd) cmd_ablate(ablate_opts, common);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (e.category()) {
      case ErrorCategory::Config: return kExitConfig;
      case ErrorCategory::Data: return kExitData;
      case ErrorCategory::Internal: return kExitInternal;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
  }
  return kExitInternal;
}
