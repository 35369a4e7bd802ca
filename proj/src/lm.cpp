#include "advtext/lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "advtext/error.hpp"
#include "linalg.hpp"

namespace advtext {
namespace {

// log-softmax of `logits` in place; returns nothing, logits become log-probs.
void log_softmax_inplace(std::span<double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double v : logits) s += std::exp(v - m);
  const double lse = m + std::log(s);
  for (double& v : logits) v -= lse;
}

void check_ids(std::span<const TokenId> ids, std::size_t vocab_rows) {
  for (TokenId id : ids) {
    if (id == 0 || id > vocab_rows) {
      throw Error(ErrorKind::kInvalidId, "token id " + std::to_string(id) + " outside LM vocabulary");
    }
  }
}

}  // namespace

void LmDims::validate() const {
  if (vocab_rows < 2 || embed_dim == 0 || hidden_dim == 0) {
    throw Error(ErrorKind::kInvalidConfig, "LM dimensions must be positive (vocab_rows >= 2)");
  }
}

LmDims LMParams::dims() const { return {embedding.rows(), embedding.cols(), lstm.hidden_dim()}; }

LMParams LMParams::zeros(const LmDims& dims) {
  dims.validate();
  return {Tensor2(dims.vocab_rows, dims.embed_dim),
          LstmWeights::zeros(dims.embed_dim, dims.hidden_dim),
          Tensor2(dims.vocab_rows, dims.hidden_dim), Tensor2(1, dims.vocab_rows)};
}

std::vector<Tensor2*> LMParams::tensors() {
  return {&embedding, &lstm.w_input, &lstm.w_recurrent, &lstm.bias, &w_out, &b_out};
}

std::vector<const Tensor2*> LMParams::tensors() const {
  return {&embedding, &lstm.w_input, &lstm.w_recurrent, &lstm.bias, &w_out, &b_out};
}

LMParams init_lm(const LmDims& dims, std::uint64_t seed) {
  LMParams p = LMParams::zeros(dims);
  std::mt19937_64 rng(seed);
  init_standard_gaussian(p.embedding, rng);
  init_weights(p.lstm.w_input, InitScheme::kUniform01, dims.embed_dim, rng);
  init_weights(p.lstm.w_recurrent, InitScheme::kUniform01, dims.hidden_dim, rng);
  init_weights(p.w_out, InitScheme::kUniform01, dims.hidden_dim, rng);
  for (std::size_t j = dims.hidden_dim; j < 2 * dims.hidden_dim; ++j) {
    p.lstm.bias(0, j) = kForgetBiasInit;
  }
  return p;
}

std::vector<std::pair<std::size_t, std::size_t>> tbptt_chunks(std::size_t length,
                                                              std::size_t window) {
  if (window == 0) throw Error(ErrorKind::kInvalidConfig, "TBPTT window must be >= 1");
  if (window > length) {
    throw Error(ErrorKind::kInvalidConfig, "TBPTT window " + std::to_string(window) +
                                               " exceeds stream length " + std::to_string(length));
  }
  std::vector<std::pair<std::size_t, std::size_t>> chunks;
  for (std::size_t start = 0; start < length; start += window) {
    chunks.emplace_back(start, std::min(window, length - start));
  }
  return chunks;
}

ChunkResult lm_chunk_loss_and_grads(const LMParams& lm, std::span<const TokenId> stream,
                                    std::size_t start, std::size_t count,
                                    const LstmState& initial, LMParams& grads) {
  if (start + count > stream.size()) throw Error(ErrorKind::kShape, "chunk past end of stream");
  const auto inputs_ids = stream.subspan(start, count);
  check_ids(inputs_ids, lm.embedding.rows());
  const Tensor2 inputs = embed(lm.embedding, inputs_ids);
  const LstmTrace trace = lstm_forward(lm.lstm, inputs, initial);

  ChunkResult result;
  result.final_state = trace.final_state();
  const std::size_t predictions = std::min(count, stream.size() - start - 1);
  result.predictions = predictions;
  if (predictions == 0) return result;

  const std::size_t vocab = lm.w_out.rows();
  const std::size_t hd = lm.lstm.hidden_dim();
  const double scale = 1.0 / static_cast<double>(predictions);
  Tensor2 d_hidden(count, hd);
  std::vector<double> logits(vocab);
  for (std::size_t t = 0; t < predictions; ++t) {
    const TokenId target = stream[start + t + 1];
    if (target == 0 || target > vocab) throw Error(ErrorKind::kInvalidId, "target id out of range");
    std::copy(lm.b_out.flat().begin(), lm.b_out.flat().end(), logits.begin());
    const double* h = trace.hidden.row(t).data();
    detail::matvec_acc(lm.w_out, h, logits.data());
    log_softmax_inplace(logits);
    const std::size_t target_row = embedding_row(target);
    result.nll_sum -= logits[target_row];
    // d(mean nll)/dlogits = (softmax - onehot) / predictions
    for (double& v : logits) v = std::exp(v) * scale;
    logits[target_row] -= scale;
    detail::outer_acc(grads.w_out, logits.data(), h);
    auto gb = grads.b_out.flat();
    for (std::size_t j = 0; j < vocab; ++j) gb[j] += logits[j];
    detail::matvec_t_acc(lm.w_out, logits.data(), d_hidden.row(t).data());
  }
  if (!std::isfinite(result.nll_sum)) throw Error(ErrorKind::kNumericOverflow, "non-finite LM loss");

  Tensor2 d_inputs;
  lstm_backward(lm.lstm, inputs, trace, d_hidden, grads.lstm, d_inputs);
  for (std::size_t t = 0; t < count; ++t) {
    auto dst = grads.embedding.row(embedding_row(inputs_ids[t]));
    const auto src = d_inputs.row(t);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
  }
  return result;
}

std::vector<TokenId> concat_stream(std::span<const std::vector<TokenId>> sequences,
                                   TokenId eos) {
  std::vector<TokenId> stream{eos};
  for (const auto& s : sequences) {
    stream.insert(stream.end(), s.begin(), s.end());
    stream.push_back(eos);
  }
  return stream;
}

std::vector<double> sequence_log_probs(const LMParams& lm, std::span<const TokenId> sequence) {
  const std::size_t vocab = lm.w_out.rows();
  const auto eos = static_cast<TokenId>(vocab);
  std::vector<TokenId> inputs{eos};
  inputs.insert(inputs.end(), sequence.begin(), sequence.end());
  check_ids(inputs, vocab);
  const Tensor2 x = embed(lm.embedding, inputs);
  const LstmTrace trace = lstm_forward(lm.lstm, x, LstmState::zeros(lm.lstm.hidden_dim()));
  std::vector<double> out;
  out.reserve(inputs.size());
  std::vector<double> logits(vocab);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const TokenId target = t + 1 < inputs.size() ? inputs[t + 1] : eos;
    std::copy(lm.b_out.flat().begin(), lm.b_out.flat().end(), logits.begin());
    detail::matvec_acc(lm.w_out, trace.hidden.row(t).data(), logits.data());
    log_softmax_inplace(logits);
    out.push_back(logits[embedding_row(target)]);
  }
  return out;
}

double perplexity_from_log_probs(std::span<const double> log_probs) {
  if (log_probs.empty()) throw Error(ErrorKind::kEmptyInput, "perplexity of zero tokens");
  double s = 0.0;
  for (double lp : log_probs) s += lp;
  return std::exp(-s / static_cast<double>(log_probs.size()));
}

double perplexity(const LMParams& lm, std::span<const std::vector<TokenId>> sequences) {
  if (sequences.empty()) throw Error(ErrorKind::kEmptyInput, "perplexity of zero sequences");
  std::vector<double> all;
  for (const auto& s : sequences) {
    const auto lp = sequence_log_probs(lm, s);
    all.insert(all.end(), lp.begin(), lp.end());
  }
  return perplexity_from_log_probs(all);
}

PerplexityReport perplexity_gap(const LMParams& lm,
                                std::span<const std::vector<TokenId>> originals,
                                std::span<const std::vector<TokenId>> adversarial) {
  if (originals.size() != adversarial.size()) {
    throw Error(ErrorKind::kPairing, "original/adversarial set sizes differ: " +
                                         std::to_string(originals.size()) + " vs " +
                                         std::to_string(adversarial.size()));
  }
  for (std::size_t i = 0; i < originals.size(); ++i) {
    if (originals[i].size() != adversarial[i].size()) {
      throw Error(ErrorKind::kPairing, "pair " + std::to_string(i) + " has mismatched lengths");
    }
  }
  PerplexityReport r;
  r.sequences = originals.size();
  r.original = perplexity(lm, originals);
  r.adversarial = perplexity(lm, adversarial);
  r.gap = r.adversarial - r.original;
  return r;
}

LmTrainResult lm_train(const LmDims& dims, std::span<const TokenId> stream,
                       std::span<const std::vector<TokenId>> validation,
                       const LmTrainConfig& config) {
  dims.validate();
  if (config.clip_norm <= 0.0) throw Error(ErrorKind::kInvalidConfig, "clip norm must be > 0");
  const auto chunks = tbptt_chunks(stream.size(), config.tbptt);
  check_ids(stream, dims.vocab_rows);

  LmTrainResult result{init_lm(dims, config.seed), {}, {}, 0.0};
  LMParams& lm = result.params;
  AdamState adam(std::as_const(lm).tensors(), config.adam);
  LMParams best = lm;
  double best_val = std::numeric_limits<double>::infinity();
  double last_val = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    LstmState state = LstmState::zeros(dims.hidden_dim);
    double nll = 0.0;
    std::size_t count = 0;
    for (const auto& [start, len] : chunks) {
      LMParams grads = LMParams::zeros(dims);
      ChunkResult cr = lm_chunk_loss_and_grads(lm, stream, start, len, state, grads);
      state = std::move(cr.final_state);
      if (cr.predictions == 0) continue;
      nll += cr.nll_sum;
      count += cr.predictions;
      clip_gradients(grads, config.clip_norm);
      adam_step(lm, grads, adam);
    }
    result.train_perplexity.push_back(std::exp(nll / static_cast<double>(std::max<std::size_t>(count, 1))));

    const double val = validation.empty() ? result.train_perplexity.back()
                                          : perplexity(lm, validation);
    result.validation_perplexity.push_back(val);
    if (!(val < last_val)) adam.decay_learning_rate();
    last_val = val;
    if (val < best_val) {
      best_val = val;
      best = lm;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  result.final_learning_rate = adam.learning_rate();
  lm = std::move(best);
  return result;
}

}  // namespace advtext
