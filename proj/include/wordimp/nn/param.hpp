#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace wordimp {

/// Ordinal importance label; LI < MI < HI.
enum class Label : int { LI = 0, MI = 1, HI = 2 };

inline constexpr int kNumLabels = 3;

constexpr int ord(Label l) { return static_cast<int>(l); }
Label label_from_ord(int v);
std::string_view to_string(Label l);

enum class HeadKind { Softmax, Ordinal, Crf };

HeadKind parse_head_kind(std::string_view name);
std::string_view to_string(HeadKind head);

/// A trainable tensor and its gradient buffer (same shape). Vectors are
/// stored as single-column matrices.
struct Param {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)),
        value(Eigen::MatrixXd::Zero(rows, cols)),
        grad(Eigen::MatrixXd::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

struct ModelConfig {
  int window_dim = 48;
  int lexical_dim = 12;
  int gru_hidden = 32;    // per direction
  int lstm_hidden = 128;  // per direction
  int num_labels = kNumLabels;
  HeadKind head = HeadKind::Ordinal;
  std::uint64_t seed = 1;

  int word_dim() const { return 2 * gru_hidden + lexical_dim; }
  int context_dim() const { return 2 * lstm_hidden; }
  /// Throws ConfigError when a dimension is non-positive or num_labels < 2.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Weights of the bi-GRU word encoder, the BiLSTM context encoder and the
/// projection heads. Gate blocks are stacked row-wise: GRU (z, r, n),
/// LSTM (i, f, g, o).
struct ModelParameters {
  struct Recurrent {
    Param W, U, b;
  };
  Recurrent gru_fwd, gru_bwd, lstm_fwd, lstm_bwd;
  Param out_W, out_b;
  Param crf_transitions, crf_start, crf_end;

  ModelParameters() = default;
  explicit ModelParameters(const ModelConfig& cfg);

  template <typename F>
  void for_each(F&& f) {
    for (Recurrent* r : {&gru_fwd, &gru_bwd, &lstm_fwd, &lstm_bwd}) {
      f(r->W);
      f(r->U);
      f(r->b);
    }
    f(out_W);
    f(out_b);
    f(crf_transitions);
    f(crf_start);
    f(crf_end);
  }

  template <typename F>
  void for_each(F&& f) const {
    const_cast<ModelParameters*>(this)->for_each([&](const Param& p) { f(p); });
  }

  void zero_grad();
  std::size_t count() const;
  /// Seeded initialization: orthogonal recurrent blocks, uniform(-0.08, 0.08)
  /// input and projection matrices, zero biases except LSTM forget gate = 1.
  void initialize(std::uint64_t seed);
  /// Throws InternalError naming the first tensor with a non-finite value or gradient.
  void check_finite() const;
};

}  // namespace wordimp
