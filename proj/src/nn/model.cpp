#include "wordimp/nn/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include <Eigen/QR>

#include "wordimp/errors.hpp"
#include "wordimp/nn/recurrent.hpp"

namespace wordimp {
namespace {

constexpr double kInitRange = 0.08;

void fill_uniform(Eigen::MatrixXd& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-kInitRange, kInitRange);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
}

// Each hidden x hidden gate block of U gets its own orthogonal matrix.
void fill_orthogonal_blocks(Eigen::MatrixXd& U, std::mt19937_64& rng) {
  const Eigen::Index hid = U.cols();
  std::normal_distribution<double> g(0.0, 1.0);
  for (Eigen::Index blk = 0; blk < U.rows() / hid; ++blk) {
    Eigen::MatrixXd a(hid, hid);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(hid, hid);
    const Eigen::VectorXd d = qr.matrixQR().diagonal();
    for (Eigen::Index j = 0; j < hid; ++j) {
      if (d[j] < 0) q.col(j) *= -1.0;
    }
    U.middleRows(blk * hid, hid) = q;
  }
}

ModelParameters::Recurrent make_recurrent(const std::string& name, int gates, int input,
                                          int hidden) {
  return {Param(name + ".W", gates * hidden, input), Param(name + ".U", gates * hidden, hidden),
          Param(name + ".b", gates * hidden, 1)};
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

Label label_from_ord(int v) {
  if (v < 0 || v >= kNumLabels) throw DataError("label ordinal out of range: " + std::to_string(v));
  return static_cast<Label>(v);
}

std::string_view to_string(Label l) {
  switch (l) {
    case Label::LI: return "LI";
    case Label::MI: return "MI";
    case Label::HI: return "HI";
  }
  return "?";
}

HeadKind parse_head_kind(std::string_view name) {
  if (name == "softmax") return HeadKind::Softmax;
  if (name == "ordinal") return HeadKind::Ordinal;
  if (name == "crf") return HeadKind::Crf;
  throw ConfigError("unknown head '" + std::string(name) + "' (expected softmax, ordinal or crf)");
}

std::string_view to_string(HeadKind head) {
  switch (head) {
    case HeadKind::Softmax: return "softmax";
    case HeadKind::Ordinal: return "ordinal";
    case HeadKind::Crf: return "crf";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (window_dim <= 0 || lexical_dim < 0 || gru_hidden <= 0 || lstm_hidden <= 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (num_labels < 2) throw ConfigError("model needs at least two labels");
}

ModelParameters::ModelParameters(const ModelConfig& cfg)
    : gru_fwd(make_recurrent("gru_fwd", 3, cfg.window_dim, cfg.gru_hidden)),
      gru_bwd(make_recurrent("gru_bwd", 3, cfg.window_dim, cfg.gru_hidden)),
      lstm_fwd(make_recurrent("lstm_fwd", 4, cfg.word_dim(), cfg.lstm_hidden)),
      lstm_bwd(make_recurrent("lstm_bwd", 4, cfg.word_dim(), cfg.lstm_hidden)),
      out_W("out.W", cfg.num_labels, cfg.context_dim()),
      out_b("out.b", cfg.num_labels, 1),
      crf_transitions("crf.transitions", cfg.num_labels, cfg.num_labels),
      crf_start("crf.start", cfg.num_labels, 1),
      crf_end("crf.end", cfg.num_labels, 1) {}

void ModelParameters::zero_grad() {
  for_each([](Param& p) { p.zero_grad(); });
}

std::size_t ModelParameters::count() const {
  std::size_t n = 0;
  for_each([&](const Param& p) { n += static_cast<std::size_t>(p.value.size()); });
  return n;
}

void ModelParameters::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (Recurrent* r : {&gru_fwd, &gru_bwd, &lstm_fwd, &lstm_bwd}) {
    fill_uniform(r->W.value, rng);
    fill_orthogonal_blocks(r->U.value, rng);
    r->b.value.setZero();
  }
  for (Recurrent* r : {&lstm_fwd, &lstm_bwd}) {
    const Eigen::Index hid = r->U.value.cols();
    r->b.value.middleRows(hid, hid).setOnes();
  }
  fill_uniform(out_W.value, rng);
  out_b.value.setZero();
  fill_uniform(crf_transitions.value, rng);
  crf_start.value.setZero();
  crf_end.value.setZero();
  zero_grad();
}

void ModelParameters::check_finite() const {
  for_each([](const Param& p) {
    if (!p.value.allFinite()) throw InternalError("non-finite value in tensor " + p.name);
    if (!p.grad.allFinite()) throw InternalError("non-finite gradient in tensor " + p.name);
  });
}

Eigen::VectorXd ordinal_targets(Label label, int num_labels) {
  Eigen::VectorXd t = Eigen::VectorXd::Zero(num_labels);
  t.head(ord(label) + 1).setOnes();
  return t;
}

Label ordinal_decode(const Eigen::Ref<const Eigen::VectorXd>& scores, double threshold) {
  return label_from_ord(ordinal_decode_index(scores, threshold));
}

double head_loss(HeadKind head, const Eigen::MatrixXd& outputs, std::span<const Label> gold,
                 const CrfWeights<double>& crf, Eigen::MatrixXd* grad,
                 CrfWeights<double>* crf_grad) {
  const Eigen::Index steps = outputs.rows();
  const Eigen::Index labels = outputs.cols();
  if (static_cast<std::size_t>(steps) != gold.size() || steps == 0) {
    throw DataError("head_loss: " + std::to_string(steps) + " outputs for " +
                    std::to_string(gold.size()) + " gold labels");
  }
  const double inv_t = 1.0 / static_cast<double>(steps);

  switch (head) {
    case HeadKind::Softmax: {
      const Eigen::MatrixXd probs = softmax_rows(outputs);
      double loss = 0.0;
      for (Eigen::Index t = 0; t < steps; ++t) {
        const int y = ord(gold[static_cast<std::size_t>(t)]);
        loss -= outputs(t, y) - log_sum_exp(outputs.row(t));
      }
      if (grad) {
        *grad = probs;
        for (Eigen::Index t = 0; t < steps; ++t) (*grad)(t, ord(gold[static_cast<std::size_t>(t)])) -= 1.0;
        *grad *= inv_t;
      }
      return loss * inv_t;
    }
    case HeadKind::Ordinal: {
      const double inv_n = inv_t / static_cast<double>(labels);
      double loss = 0.0;
      if (grad) grad->resize(steps, labels);
      for (Eigen::Index t = 0; t < steps; ++t) {
        const Eigen::VectorXd target = ordinal_targets(gold[static_cast<std::size_t>(t)], static_cast<int>(labels));
        for (Eigen::Index k = 0; k < labels; ++k) {
          const double z = outputs(t, k);
          loss += softplus(z) - target[k] * z;
          if (grad) (*grad)(t, k) = (1.0 / (1.0 + std::exp(-z)) - target[k]) * inv_n;
        }
      }
      return loss * inv_n;
    }
    case HeadKind::Crf: {
      std::vector<int> path(gold.size());
      for (std::size_t t = 0; t < gold.size(); ++t) path[t] = ord(gold[t]);
      const CrfMarginals<double> m = crf_marginals(outputs, crf);
      const double gold_score = crf_path_score(outputs, crf, path);
      if (grad) {
        *grad = m.unary;
        for (Eigen::Index t = 0; t < steps; ++t) (*grad)(t, path[static_cast<std::size_t>(t)]) -= 1.0;
        *grad *= inv_t;
      }
      if (crf_grad) {
        Eigen::MatrixXd dtrans = m.pairwise;
        for (std::size_t t = 1; t < path.size(); ++t) dtrans(path[t - 1], path[t]) -= 1.0;
        Eigen::VectorXd dstart = m.unary.row(0).transpose();
        dstart[path.front()] -= 1.0;
        Eigen::VectorXd dend = m.unary.row(steps - 1).transpose();
        dend[path.back()] -= 1.0;
        crf_grad->transitions = dtrans * inv_t;
        crf_grad->start = dstart * inv_t;
        crf_grad->end = dend * inv_t;
      }
      return (m.log_partition - gold_score) * inv_t;
    }
  }
  throw InternalError("head_loss: unknown head");
}

std::vector<Label> head_decode(HeadKind head, const Eigen::MatrixXd& outputs,
                               const CrfWeights<double>& crf) {
  std::vector<Label> out(static_cast<std::size_t>(outputs.rows()));
  switch (head) {
    case HeadKind::Softmax:
      for (Eigen::Index t = 0; t < outputs.rows(); ++t) {
        Eigen::Index best;
        outputs.row(t).maxCoeff(&best);
        out[static_cast<std::size_t>(t)] = label_from_ord(static_cast<int>(best));
      }
      break;
    case HeadKind::Ordinal: {
      const Eigen::MatrixXd scores = sigmoid(outputs);
      for (Eigen::Index t = 0; t < outputs.rows(); ++t) {
        out[static_cast<std::size_t>(t)] = label_from_ord(ordinal_decode_index(scores.row(t)));
      }
      break;
    }
    case HeadKind::Crf: {
      const std::vector<int> path = crf_viterbi(outputs, crf);
      for (std::size_t t = 0; t < path.size(); ++t) out[t] = label_from_ord(path[t]);
      break;
    }
  }
  return out;
}

SequenceLabeler::SequenceLabeler(const ModelConfig& cfg) : cfg_(cfg), params_(cfg) {
  cfg_.validate();
  params_.initialize(cfg.seed);
}

SequenceLabeler::SequenceLabeler(const ModelConfig& cfg, ModelParameters params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  const ModelParameters expected(cfg_);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
  expected.for_each([&](const Param& p) { shapes.emplace_back(p.value.rows(), p.value.cols()); });
  std::size_t i = 0;
  params_.for_each([&](const Param& p) {
    if (p.value.rows() != shapes[i].first || p.value.cols() != shapes[i].second) {
      throw DataError("tensor " + p.name + " has shape " + std::to_string(p.value.rows()) + "x" +
                      std::to_string(p.value.cols()) + ", config expects " +
                      std::to_string(shapes[i].first) + "x" + std::to_string(shapes[i].second));
    }
    ++i;
  });
}

CrfWeights<double> SequenceLabeler::crf_weights() const {
  return {params_.crf_transitions.value, params_.crf_start.value.col(0),
          params_.crf_end.value.col(0)};
}

void SequenceLabeler::check_input(const UtteranceInput& in) const {
  if (in.windows.empty()) throw DataError("empty utterance");
  if (in.lexical.rows() != cfg_.lexical_dim ||
      in.lexical.cols() != static_cast<Eigen::Index>(in.windows.size())) {
    throw DataError("lexical input has shape " + std::to_string(in.lexical.rows()) + "x" +
                    std::to_string(in.lexical.cols()) + ", expected " +
                    std::to_string(cfg_.lexical_dim) + "x" + std::to_string(in.windows.size()));
  }
  for (const Eigen::MatrixXd& w : in.windows) {
    if (w.rows() < 1 || w.cols() != cfg_.window_dim) {
      throw DataError("word window matrix has shape " + std::to_string(w.rows()) + "x" +
                      std::to_string(w.cols()) + ", expected n x " + std::to_string(cfg_.window_dim));
    }
  }
}

Eigen::VectorXd SequenceLabeler::encode_word(const Eigen::MatrixXd& windows) const {
  const Eigen::MatrixXd x = windows.transpose();
  Eigen::VectorXd out(2 * cfg_.gru_hidden);
  out.head(cfg_.gru_hidden) = gru_forward(params_.gru_fwd, x);
  out.tail(cfg_.gru_hidden) = gru_forward(params_.gru_bwd, reverse_columns(x));
  return out;
}

Eigen::MatrixXd SequenceLabeler::word_vectors(const UtteranceInput& in) const {
  check_input(in);
  const auto steps = static_cast<Eigen::Index>(in.size());
  Eigen::MatrixXd s(cfg_.word_dim(), steps);
  for (Eigen::Index t = 0; t < steps; ++t) {
    s.col(t).head(2 * cfg_.gru_hidden) = encode_word(in.windows[static_cast<std::size_t>(t)]);
    s.col(t).tail(cfg_.lexical_dim) = in.lexical.col(t);
  }
  return s;
}

Eigen::MatrixXd SequenceLabeler::context(const UtteranceInput& in) const {
  return bilstm_forward(params_, word_vectors(in));
}

Eigen::MatrixXd SequenceLabeler::outputs(const UtteranceInput& in) const {
  return ((params_.out_W.value * context(in)).colwise() + params_.out_b.value.col(0)).transpose();
}

std::vector<Label> SequenceLabeler::predict(const UtteranceInput& in) const {
  return head_decode(cfg_.head, outputs(in), crf_weights());
}

double SequenceLabeler::loss(const UtteranceInput& in, std::span<const Label> gold) const {
  return head_loss(cfg_.head, outputs(in), gold, crf_weights());
}

double SequenceLabeler::accumulate_gradient(const UtteranceInput& in,
                                            std::span<const Label> gold, double weight) {
  check_input(in);
  const auto steps = static_cast<Eigen::Index>(in.size());
  const int gh = cfg_.gru_hidden;

  std::vector<GruTrace> gf(in.size()), gb(in.size());
  Eigen::MatrixXd s(cfg_.word_dim(), steps);
  for (Eigen::Index t = 0; t < steps; ++t) {
    const auto w = static_cast<std::size_t>(t);
    const Eigen::MatrixXd x = in.windows[w].transpose();
    s.col(t).head(gh) = gru_forward(params_.gru_fwd, x, &gf[w]);
    s.col(t).segment(gh, gh) = gru_forward(params_.gru_bwd, reverse_columns(x), &gb[w]);
    s.col(t).tail(cfg_.lexical_dim) = in.lexical.col(t);
  }
  LstmTrace lf, lb;
  const Eigen::MatrixXd ctx = bilstm_forward(params_, s, &lf, &lb);
  const Eigen::MatrixXd out =
      ((params_.out_W.value * ctx).colwise() + params_.out_b.value.col(0)).transpose();

  Eigen::MatrixXd d_out;
  CrfWeights<double> d_crf;
  const double loss = head_loss(cfg_.head, out, gold, crf_weights(), &d_out,
                                cfg_.head == HeadKind::Crf ? &d_crf : nullptr);
  if (!std::isfinite(loss)) throw InternalError("non-finite loss in forward pass");
  d_out *= weight;

  if (cfg_.head == HeadKind::Crf) {
    params_.crf_transitions.grad += weight * d_crf.transitions;
    params_.crf_start.grad.col(0) += weight * d_crf.start;
    params_.crf_end.grad.col(0) += weight * d_crf.end;
  }
  // outputs = (W ctx + b)^T
  const Eigen::MatrixXd d_logits = d_out.transpose();  // L x T
  params_.out_W.grad += d_logits * ctx.transpose();
  params_.out_b.grad.col(0) += d_logits.rowwise().sum();
  const Eigen::MatrixXd d_ctx = params_.out_W.value.transpose() * d_logits;

  const int lh = cfg_.lstm_hidden;
  Eigen::MatrixXd d_s = lstm_backward(params_.lstm_fwd, lf, d_ctx.topRows(lh));
  d_s += reverse_columns(lstm_backward(params_.lstm_bwd, lb, reverse_columns(d_ctx.bottomRows(lh))));

  for (Eigen::Index t = 0; t < steps; ++t) {
    const auto w = static_cast<std::size_t>(t);
    gru_backward(params_.gru_fwd, gf[w], d_s.col(t).head(gh));
    gru_backward(params_.gru_bwd, gb[w], d_s.col(t).segment(gh, gh));
  }
  return loss;
}

}  // namespace wordimp
