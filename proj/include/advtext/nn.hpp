#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "advtext/tensor.hpp"

namespace advtext {

/// Vocabulary ids are dense in 1..|V|; |V|+1 is end-of-sequence. The
/// embedding dictionary row of id `i` is `i - 1`, so the dictionary has
/// |V|+1 rows and the eos row is last.
using TokenId = std::uint32_t;

inline std::size_t embedding_row(TokenId id) { return static_cast<std::size_t>(id) - 1; }

enum class InitScheme { kLecunGaussian, kUniform01 };

// Fills `t` according to `scheme`: N(0, 1/fan_in) or U[-0.1, 0.1].
void init_weights(Tensor2& t, InitScheme scheme, std::size_t fan_in, std::mt19937_64& rng);
void init_standard_gaussian(Tensor2& t, std::mt19937_64& rng);

/// Unidirectional LSTM weights. Gate blocks are stacked in the order
/// input, forget, cell, output along the rows:
///   z = W x_t + U h_{t-1} + b
///   i = sigm(z_i), f = sigm(z_f), g = tanh(z_g), o = sigm(z_o)
///   c_t = f * c_{t-1} + i * g,  h_t = o * tanh(c_t)
struct LstmWeights {
  Tensor2 w_input;      // 4H x D
  Tensor2 w_recurrent;  // 4H x H
  Tensor2 bias;         // 1 x 4H

  std::size_t input_dim() const { return w_input.cols(); }
  std::size_t hidden_dim() const { return w_recurrent.cols(); }

  static LstmWeights zeros(std::size_t input_dim, std::size_t hidden_dim);
  std::vector<Tensor2*> tensors() { return {&w_input, &w_recurrent, &bias}; }
  std::vector<const Tensor2*> tensors() const { return {&w_input, &w_recurrent, &bias}; }
  bool operator==(const LstmWeights&) const = default;
};

/// ReLU feedforward layer followed by a 2-way output layer.
struct HeadWeights {
  Tensor2 w_hidden;  // F x H
  Tensor2 b_hidden;  // 1 x F
  Tensor2 w_out;     // 2 x F
  Tensor2 b_out;     // 1 x 2

  static HeadWeights zeros(std::size_t hidden_dim, std::size_t head_dim);
  std::vector<Tensor2*> tensors() { return {&w_hidden, &b_hidden, &w_out, &b_out}; }
  std::vector<const Tensor2*> tensors() const {
    return {&w_hidden, &b_hidden, &w_out, &b_out};
  }
  bool operator==(const HeadWeights&) const = default;
};

struct ClassifierDims {
  std::size_t vocab_rows = 0;  // |V| + 1
  std::size_t embed_dim = 256;
  std::size_t hidden_dim = 1024;
  std::size_t head_dim = 30;

  void validate() const;
  bool operator==(const ClassifierDims&) const = default;
};

inline constexpr std::size_t kNumClasses = 2;
inline constexpr double kForgetBiasInit = 1.0;

struct ClassifierParams {
  Tensor2 embedding;  // (|V|+1) x D
  LstmWeights lstm;
  HeadWeights head;

  ClassifierDims dims() const;
  static ClassifierParams zeros(const ClassifierDims& dims);

  // Declaration order; shared by the optimizer and checkpoint format.
  std::vector<Tensor2*> tensors();
  std::vector<const Tensor2*> tensors() const;
  bool all_finite() const;
  bool operator==(const ClassifierParams&) const = default;
};

/// Deterministic given the seed. Forget-gate biases start at 1.0, other
/// biases at zero, embeddings from N(0, 1).
ClassifierParams init_params(const ClassifierDims& dims, InitScheme scheme, std::uint64_t seed);

/// Immutable deep copy of the classifier taken when crafting an attack.
/// Gradients computed through it never flow back into the live weights.
class FrozenParams {
 public:
  explicit FrozenParams(const ClassifierParams& live)
      : params_(std::make_shared<const ClassifierParams>(live)) {}

  const ClassifierParams& get() const { return *params_; }

 private:
  std::shared_ptr<const ClassifierParams> params_;
};

/// Looks up rows of `embedding` for `ids`. Throws kInvalidId on a bad id.
Tensor2 embed(const Tensor2& embedding, std::span<const TokenId> ids);

// ---------------------------------------------------------------------------
// LSTM forward/backward shared by the classifier and the language model.

struct LstmState {
  std::vector<double> h;
  std::vector<double> c;

  static LstmState zeros(std::size_t hidden_dim) {
    return {std::vector<double>(hidden_dim, 0.0), std::vector<double>(hidden_dim, 0.0)};
  }
};

struct LstmTrace {
  LstmState initial;
  Tensor2 gates;   // T x 4H, post-activation (i, f, g, o)
  Tensor2 cells;   // T x H
  Tensor2 hidden;  // T x H
  Tensor2 tanh_cells;  // T x H

  std::size_t steps() const { return hidden.rows(); }
  LstmState final_state() const;
};

LstmTrace lstm_forward(const LstmWeights& w, const Tensor2& inputs, const LstmState& initial);

/// Backpropagates `d_hidden` (T x H, one row of dL/dh_t per step) through the
/// recurrence. Parameter gradients are accumulated into `grads`; input
/// gradients are written to `d_inputs` (T x D).
void lstm_backward(const LstmWeights& w, const Tensor2& inputs, const LstmTrace& trace,
                   const Tensor2& d_hidden, LstmWeights& grads, Tensor2& d_inputs);

// ---------------------------------------------------------------------------
// Classifier.

struct ForwardResult {
  std::array<double, kNumClasses> log_probs{};
  LstmTrace trace;
  std::vector<double> head_pre;  // F, before ReLU
  std::vector<double> head_act;  // F, after ReLU

  int predicted() const { return log_probs[1] > log_probs[0] ? 1 : 0; }
};

/// Runs the classifier over an embedded sequence (T x D, T >= 1) and
/// classifies from the final hidden state.
ForwardResult forward(const ClassifierParams& params, const Tensor2& embedded);

/// Gradients of -log p(label | x). The embedding dictionary is not on this
/// path; its gradient is `input_grads` scattered back onto the looked-up rows.
struct GradientBundle {
  LstmWeights lstm;
  HeadWeights head;
  Tensor2 input_grads;  // T x D
};

struct LossAndGrads {
  double nll = 0.0;
  int predicted = 0;
  GradientBundle grads;
};

LossAndGrads loss_and_grads(const ClassifierParams& params, const Tensor2& embedded, int label);

/// Gradient of the NLL with respect to the input block only.
Tensor2 input_gradient(const ClassifierParams& params, const Tensor2& embedded, int label);

/// Adds `bundle` times `weight` to a full-shape gradient accumulator and
/// scatters its input gradients onto the embedding rows of `ids`.
void accumulate(ClassifierParams& acc, const GradientBundle& bundle,
                std::span<const TokenId> ids, double weight);

}  // namespace advtext
