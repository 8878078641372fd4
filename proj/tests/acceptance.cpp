// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "test_support.hpp"
#include "wordimp/dsp.hpp"
#include "wordimp/evaluation.hpp"
#include "wordimp/nn/heads.hpp"
#include "wordimp/nn/model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wordimp;
using namespace wordimp::testing;

namespace {

struct Outcome {
  enum class Status { Pass, Fail, Skip } status;
  std::string detail;
};

Outcome pass_if(bool ok, std::string detail) {
  return {ok ? Outcome::Status::Pass : Outcome::Status::Fail, std::move(detail)};
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "wordimp_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int cli(const std::string& args) {
  const std::string cmd =
      "cd '" + work_dir().string() + "' && '" WORDIMP_CLI_PATH "' " + args + " >>cli.log 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json(const fs::path& rel) {
  std::ifstream in(work_dir() / rel);
  return json::parse(in);
}

// 1 -------------------------------------------------------------------------
Outcome gradient_check() {
  const PreparedBatch batch = synthetic_batch(2, 101);
  double worst = 0.0;
  std::string worst_name;
  for (HeadKind head : {HeadKind::Softmax, HeadKind::Ordinal, HeadKind::Crf}) {
    ModelConfig cfg;
    cfg.head = head;
    cfg.seed = 5;
    SequenceLabeler net(cfg);
    // Nonzero biases and CRF terms so every tensor carries signal.
    std::mt19937_64 rng(77);
    std::normal_distribution<double> g(0.0, 0.1);
    net.params().for_each([&](Param& p) {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += g(rng);
    });
    for (const TensorCheck& t : finite_difference_check(net, batch, 1e-5, 40, 9)) {
      if (t.relative_error > worst || worst_name.empty()) {
        worst = std::max(worst, t.relative_error);
        worst_name = std::string(to_string(head)) + ":" + t.name;
      }
    }
  }
  return pass_if(worst < 1e-4, fmt("max relative error %.3g (%s), threshold 1e-4", worst, worst_name.c_str()));
}

// 2 -------------------------------------------------------------------------
Outcome crf_oracle() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g(0.0, 1.5);
  std::uniform_int_distribution<int> len(1, 6);
  double worst = 0.0;
  int path_mismatch = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int steps = len(rng);
    Eigen::MatrixXd e(steps, 3), trans(3, 3);
    Eigen::VectorXd start(3), end(3);
    for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = g(rng);
    for (Eigen::Index i = 0; i < 9; ++i) trans.data()[i] = g(rng);
    for (int i = 0; i < 3; ++i) {
      start[i] = g(rng);
      end[i] = g(rng);
    }
    const CrfWeights<double> w{trans, start, end};
    const CrfBruteForce oracle = crf_brute_force(e, trans, start, end);
    worst = std::max(worst, std::abs(crf_log_partition(e, w) - oracle.log_partition));
    path_mismatch += crf_viterbi(e, w) != oracle.best_path;
  }
  return pass_if(worst <= 1e-8 && path_mismatch == 0,
                 fmt("max |logZ - brute| %.3g (tol 1e-8), viterbi mismatches %d/100", worst, path_mismatch));
}

// 3 -------------------------------------------------------------------------
Outcome dsp_oracles() {
  constexpr double rate = 16000.0;
  bool ok = true;
  std::ostringstream detail;

  double worst_pitch = 0.0;
  for (double f : {100.0, 150.0, 220.0, 330.0, 440.0}) {
    const FrameTrack t = compute_frame_track({sine(f, 1.0, rate, 0.7), rate});
    std::vector<double> err;
    for (std::size_t i = 0; i < t.size(); ++i) err.push_back(t.pitch_hz[i] ? std::abs(*t.pitch_hz[i] - f) : 1e9);
    std::sort(err.begin(), err.end());
    const std::size_t n = err.size();
    const double med = n % 2 ? err[n / 2] : 0.5 * (err[n / 2 - 1] + err[n / 2]);
    worst_pitch = std::max(worst_pitch, med);
  }
  ok &= worst_pitch <= 2.0;
  detail << fmt("pitch median err max %.3g Hz", worst_pitch);

  double worst_tilt = 0.0;
  const Eigen::VectorXd h1 = sine(100.0, 0.1, rate);
  for (double ratio : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const auto tilt = spectral_tilt_h1h2(h1 + ratio * sine(200.0, 0.1, rate), rate, 100.0);
    worst_tilt = std::max(worst_tilt, tilt ? std::abs(*tilt + 20.0 * std::log10(ratio)) : 1e9);
  }
  ok &= worst_tilt <= 0.5;
  detail << fmt("; H1-H2 err max %.3g dB", worst_tilt);

  const double in_band = band_rms(sine(1000.0, 0.025, rate), rate);
  const double low = band_rms(sine(100.0, 0.025, rate), rate);
  const double high = band_rms(sine(3500.0, 0.025, rate), rate);
  ok &= in_band >= 0.67 && low <= 0.05 && high <= 0.05;
  detail << fmt("; band in %.4f out %.4f/%.4f", in_band, low, high);

  int syllable_errors = 0;
  for (int bursts = 1; bursts <= 4; ++bursts) {
    const AudioBuffer b = burst_signal(bursts);
    syllable_errors += detect_syllable_nuclei(b, {0.0, b.duration()}, compute_frame_track(b)) != bursts;
  }
  ok &= syllable_errors == 0;
  detail << fmt("; syllable count errors %d/4", syllable_errors);
  return pass_if(ok, detail.str());
}

// 4 -------------------------------------------------------------------------
Outcome overfit() {
  if (cli("synth-data --out overfit --n 50 --seed 7") != 0) return {Outcome::Status::Fail, "synth-data failed"};
  if (cli("synth-data --out heldout --n 20 --seed 8") != 0) return {Outcome::Status::Fail, "synth-data failed"};
  bool ok = true;
  std::ostringstream detail;
  for (const char* head : {"softmax", "ordinal", "crf"}) {
    const std::string out = std::string("overfit_") + head;
    if (cli("train --corpus overfit/corpus.jsonl --out " + out + " --head " + head +
            " --seed 7 --max-epochs 200 --patience 200") != 0) {
      return {Outcome::Status::Fail, std::string("train failed for ") + head};
    }
    double best_train = 0.0;
    int first_99 = 0;
    std::ifstream log(work_dir() / out / "train_log.jsonl");
    std::string line;
    while (std::getline(log, line)) {
      const json j = json::parse(line);
      if (j.at("type") != "epoch") continue;
      const double acc = j.at("train_acc").get<double>();
      best_train = std::max(best_train, acc);
      if (acc >= 99.0 && first_99 == 0) first_99 = j.at("epoch").get<int>();
    }
    const double test_acc = read_json(fs::path(out) / "metrics.json").at("acc").get<double>();
    if (cli("evaluate --model " + out + "/checkpoint.json --corpus heldout/corpus.jsonl --split all --out " + out +
            "/heldout.json") != 0) {
      return {Outcome::Status::Fail, std::string("evaluate failed for ") + head};
    }
    const double fresh_acc = read_json(fs::path(out) / "heldout.json").at("acc").get<double>();
    ok &= best_train >= 99.0 && test_acc >= 90.0 && fresh_acc >= 90.0;
    detail << fmt("%s train %.1f (first >=99 at epoch %d) test %.1f fresh %.1f; ", head, best_train, first_99,
                  test_acc, fresh_acc);
  }
  return pass_if(ok, detail.str());
}

// 5 -------------------------------------------------------------------------
Outcome metric_oracle() {
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<int> lab(0, 2);
  std::uniform_int_distribution<std::size_t> len(1, 50);
  int metric_mismatch = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = len(rng);
    std::vector<Label> g(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = label_from_ord(lab(rng));
      p[i] = label_from_ord(lab(rng));
    }
    const Metrics m = metrics(g, p);
    const DirectMetrics d = direct_metrics(g, p);
    // Algebraically equal formulas in different operation order; only rounding may differ.
    auto same = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
    metric_mismatch += !(same(m.acc, d.acc) && same(m.macro_f1, d.macro_f1) && same(m.rms, d.rms));
  }

  const bool bins = bin_score(0.0) == Label::LI && bin_score(0.29999) == Label::LI && bin_score(0.3) == Label::MI &&
                    bin_score(0.59999) == Label::MI && bin_score(0.6) == Label::HI && bin_score(1.0) == Label::HI;

  std::vector<std::vector<std::string>> lists = {{}};
  for (std::size_t i = 0; i < lists.size(); ++i) {
    if (lists[i].size() == 6) continue;
    for (const char* s : {"a", "b", "c"}) {
      auto next = lists[i];
      next.push_back(s);
      lists.push_back(std::move(next));
    }
  }
  std::size_t align_mismatch = 0, pairs = 0;
  for (const auto& r : lists) {
    for (const auto& h : lists) {
      ++pairs;
      align_mismatch += edit_cost(align_hypothesis(r, h)) != levenshtein(r, h);
    }
  }
  return pass_if(metric_mismatch == 0 && bins && align_mismatch == 0,
                 fmt("metric mismatches %d/1000; bin boundaries %s; alignment mismatches %zu/%zu", metric_mismatch,
                     bins ? "ok" : "WRONG", align_mismatch, pairs));
}

// 6 -------------------------------------------------------------------------
Outcome ordinal_decoder() {
  const bool examples = ordinal_decode(Eigen::Vector3d(0.9, 0.7, 0.3)) == Label::MI &&
                        ordinal_decode(Eigen::Vector3d(0.9, 0.6, 0.8)) == Label::HI &&
                        ordinal_decode(Eigen::Vector3d(0.4, 0.9, 0.9)) == Label::LI;
  std::mt19937_64 rng(66);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const Eigen::Vector3d s(u(rng), u(rng), u(rng));
    Eigen::Vector3d raised = s;
    const int k = trial % 3;
    raised[k] += (1.0 - s[k]) * u(rng);
    violations += ord(ordinal_decode(raised)) < ord(ordinal_decode(s));
  }
  return pass_if(examples && violations == 0,
                 fmt("worked examples %s; monotonicity violations %d/10000", examples ? "ok" : "WRONG", violations));
}

// 7 -------------------------------------------------------------------------
Outcome determinism() {
  std::vector<std::vector<fs::path>> artifacts(2);
  for (int run = 0; run < 2; ++run) {
    const std::string d = "det" + std::to_string(run);
    if (cli("synth-data --out " + d + "/syn --n 15 --seed 11") != 0 ||
        cli("extract --corpus " + d + "/syn/corpus.jsonl --out " + d + "/feats --seed 11 --jobs 2") != 0 ||
        cli("train --corpus " + d + "/syn/corpus.jsonl --out " + d + "/model --head crf --seed 11 --max-epochs 8") !=
            0 ||
        cli("evaluate --model " + d + "/model/checkpoint.json --corpus " + d + "/syn/corpus.jsonl --out " + d +
            "/eval.json --jobs 2") != 0) {
      return {Outcome::Status::Fail, "pipeline run failed"};
    }
    for (const auto& e : fs::recursive_directory_iterator(work_dir() / d)) {
      if (e.is_regular_file()) artifacts[static_cast<std::size_t>(run)].push_back(fs::relative(e.path(), work_dir() / d));
    }
    std::sort(artifacts[static_cast<std::size_t>(run)].begin(), artifacts[static_cast<std::size_t>(run)].end());
  }
  if (artifacts[0] != artifacts[1]) return {Outcome::Status::Fail, "runs produced different file sets"};
  int differing = 0;
  std::string first;
  for (const fs::path& rel : artifacts[0]) {
    if (file_checksum(work_dir() / "det0" / rel) != file_checksum(work_dir() / "det1" / rel)) {
      if (!differing++) first = rel.string();
    }
  }
  return pass_if(differing == 0, fmt("%zu artifacts compared (wav, dumps, checkpoint, logs, reports); %d differ%s%s",
                                     artifacts[0].size(), differing, differing ? ", first " : "", first.c_str()));
}

// 8 -------------------------------------------------------------------------
Outcome reference_corpus() {
  const char* corpus = std::getenv("WORDIMP_SWITCHBOARD_CORPUS");
  if (!corpus || !*corpus) {
    return {Outcome::Status::Skip, "WORDIMP_SWITCHBOARD_CORPUS not set; annotated corpus not available"};
  }
  const fs::path path = fs::absolute(corpus);
  double rms[3] = {0, 0, 0};
  const char* heads[3] = {"ordinal", "softmax", "crf"};
  for (int h = 0; h < 3; ++h) {
    const std::string out = std::string("reference_") + heads[h];
    if (cli("train --corpus '" + path.string() + "' --out " + out + " --head " + heads[h] +
            " --trials 5 --seed 1 --jobs 4") != 0) {
      return {Outcome::Status::Fail, std::string("train failed for ") + heads[h]};
    }
    rms[h] = read_json(fs::path(out) / "summary.json").at("rms").get<double>();
  }
  const bool ok = std::abs(rms[0] - 68.21) <= 5.0 && rms[0] < rms[1] && rms[0] < rms[2];
  return pass_if(ok, fmt("mean test RMS over 5 trials: ordinal %.2f (target 68.21 +/- 5), softmax %.2f, crf %.2f",
                         rms[0], rms[1], rms[2]));
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", 120, gradient_check},
      {2, "crf oracle", 10, crf_oracle},
      {3, "dsp oracles", 30, dsp_oracles},
      {4, "overfit sanity", 900, overfit},
      {5, "metric oracle", 60, metric_oracle},
      {6, "ordinal decoder", 60, ordinal_decoder},
      {7, "determinism", 600, determinism},
      {8, "reference corpus (conditional)", 1e9, reference_corpus},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Outcome::Status::Fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.status == Outcome::Status::Pass && secs > c.budget_s) {
      o = {Outcome::Status::Fail, o.detail + fmt("; over time budget %.0f s", c.budget_s)};
    }
    const char* tag = o.status == Outcome::Status::Pass ? "PASS" : o.status == Outcome::Status::Fail ? "FAIL" : "SKIP";
    failures += o.status == Outcome::Status::Fail;
    std::printf("%s criterion %d (%s) [%.1f s]: %s\n", tag, c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
