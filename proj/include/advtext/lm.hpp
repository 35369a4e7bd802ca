#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "advtext/nn.hpp"
#include "advtext/optim.hpp"

namespace advtext {

struct LmDims {
  std::size_t vocab_rows = 0;  // |V| + 1, eos included
  std::size_t embed_dim = 256;
  std::size_t hidden_dim = 1024;

  void validate() const;
  bool operator==(const LmDims&) const = default;
};

struct LMParams {
  Tensor2 embedding;  // (|V|+1) x D
  LstmWeights lstm;
  Tensor2 w_out;  // (|V|+1) x H
  Tensor2 b_out;  // 1 x (|V|+1)

  LmDims dims() const;
  static LMParams zeros(const LmDims& dims);
  std::vector<Tensor2*> tensors();
  std::vector<const Tensor2*> tensors() const;
  bool operator==(const LMParams&) const = default;
};

/// Weights uniform in [-0.1, 0.1], embeddings N(0, 1), forget biases 1.0.
LMParams init_lm(const LmDims& dims, std::uint64_t seed);

/// Splits a stream of `length` tokens into consecutive windows of at most
/// `window` tokens, as (start, count) pairs.
std::vector<std::pair<std::size_t, std::size_t>> tbptt_chunks(std::size_t length,
                                                              std::size_t window);

struct ChunkResult {
  double nll_sum = 0.0;        // summed over predictions in the chunk
  std::size_t predictions = 0;
  LstmState final_state;
};

/// Forward/backward over stream[start, start+count) predicting each next
/// token. Accumulates gradients of the chunk's mean NLL into `grads`.
/// Gradients do not flow into `initial` (truncation).
ChunkResult lm_chunk_loss_and_grads(const LMParams& lm, std::span<const TokenId> stream,
                                    std::size_t start, std::size_t count,
                                    const LstmState& initial, LMParams& grads);

struct LmTrainConfig {
  std::size_t tbptt = 35;
  double clip_norm = 5.0;
  std::size_t epochs = 10;
  std::size_t patience = 3;
  std::uint64_t seed = 1;
  AdamConfig adam{};
};

struct LmTrainResult {
  LMParams params;
  std::vector<double> train_perplexity;  // per epoch
  std::vector<double> validation_perplexity;
  double final_learning_rate = 0.0;
};

/// Trains on one end-to-end token stream with truncated BPTT, carrying the
/// hidden state across windows. The learning rate decays whenever
/// validation perplexity fails to fall; the best-validation weights win.
LmTrainResult lm_train(const LmDims& dims, std::span<const TokenId> stream,
                       std::span<const std::vector<TokenId>> validation,
                       const LmTrainConfig& config);

/// End-to-end stream: eos, s1..., eos, s2..., eos.
std::vector<TokenId> concat_stream(std::span<const std::vector<TokenId>> sequences,
                                   TokenId eos);

/// log p of each token of `sequence` followed by eos, starting from eos with
/// a zero state. Length is sequence.size() + 1.
std::vector<double> sequence_log_probs(const LMParams& lm, std::span<const TokenId> sequence);

/// exp(-mean(log_probs)). Throws kEmptyInput on an empty span.
double perplexity_from_log_probs(std::span<const double> log_probs);

/// Per-token perplexity pooled over every token of every sequence.
double perplexity(const LMParams& lm, std::span<const std::vector<TokenId>> sequences);

struct PerplexityReport {
  double original = 0.0;
  double adversarial = 0.0;
  double gap = 0.0;
  std::size_t sequences = 0;
};

PerplexityReport perplexity_gap(const LMParams& lm,
                                std::span<const std::vector<TokenId>> originals,
                                std::span<const std::vector<TokenId>> adversarial);

}  // namespace advtext
