#include "advtext/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "advtext/error.hpp"
#include "linalg.hpp"

namespace advtext {
namespace {

using detail::matvec_acc;
using detail::matvec_t_acc;
using detail::outer_acc;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_label(int label) {
  if (label != 0 && label != 1) {
    throw Error(ErrorKind::kInvalidConfig, "label must be 0 or 1, got " + std::to_string(label));
  }
}

void check_embedded(const ClassifierParams& params, const Tensor2& embedded) {
  if (embedded.rows() == 0) throw Error(ErrorKind::kShape, "empty input sequence");
  if (embedded.cols() != params.lstm.input_dim()) {
    throw Error(ErrorKind::kShape, "input width " + std::to_string(embedded.cols()) +
                                       " != embedding dim " +
                                       std::to_string(params.lstm.input_dim()));
  }
}

}  // namespace

void init_weights(Tensor2& t, InitScheme scheme, std::size_t fan_in, std::mt19937_64& rng) {
  switch (scheme) {
    case InitScheme::kLecunGaussian: {
      std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / static_cast<double>(fan_in)));
      for (double& v : t.flat()) v = dist(rng);
      break;
    }
    case InitScheme::kUniform01: {
      std::uniform_real_distribution<double> dist(-0.1, 0.1);
      for (double& v : t.flat()) v = dist(rng);
      break;
    }
  }
}

void init_standard_gaussian(Tensor2& t, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  for (double& v : t.flat()) v = dist(rng);
}

LstmWeights LstmWeights::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  return {Tensor2(4 * hidden_dim, input_dim), Tensor2(4 * hidden_dim, hidden_dim),
          Tensor2(1, 4 * hidden_dim)};
}

HeadWeights HeadWeights::zeros(std::size_t hidden_dim, std::size_t head_dim) {
  return {Tensor2(head_dim, hidden_dim), Tensor2(1, head_dim), Tensor2(kNumClasses, head_dim),
          Tensor2(1, kNumClasses)};
}

void ClassifierDims::validate() const {
  if (vocab_rows == 0 || embed_dim == 0 || hidden_dim == 0 || head_dim == 0) {
    throw Error(ErrorKind::kInvalidConfig, "classifier dimensions must be positive");
  }
}

ClassifierDims ClassifierParams::dims() const {
  return {embedding.rows(), embedding.cols(), lstm.hidden_dim(), head.w_hidden.rows()};
}

ClassifierParams ClassifierParams::zeros(const ClassifierDims& dims) {
  dims.validate();
  return {Tensor2(dims.vocab_rows, dims.embed_dim),
          LstmWeights::zeros(dims.embed_dim, dims.hidden_dim),
          HeadWeights::zeros(dims.hidden_dim, dims.head_dim)};
}

std::vector<Tensor2*> ClassifierParams::tensors() {
  std::vector<Tensor2*> out{&embedding};
  for (auto* t : lstm.tensors()) out.push_back(t);
  for (auto* t : head.tensors()) out.push_back(t);
  return out;
}

std::vector<const Tensor2*> ClassifierParams::tensors() const {
  std::vector<const Tensor2*> out{&embedding};
  for (auto* t : lstm.tensors()) out.push_back(t);
  for (auto* t : head.tensors()) out.push_back(t);
  return out;
}

bool ClassifierParams::all_finite() const {
  const auto ts = tensors();
  return std::all_of(ts.begin(), ts.end(), [](const Tensor2* t) { return t->all_finite(); });
}

ClassifierParams init_params(const ClassifierDims& dims, InitScheme scheme, std::uint64_t seed) {
  ClassifierParams p = ClassifierParams::zeros(dims);
  std::mt19937_64 rng(seed);
  init_standard_gaussian(p.embedding, rng);
  init_weights(p.lstm.w_input, scheme, dims.embed_dim, rng);
  init_weights(p.lstm.w_recurrent, scheme, dims.hidden_dim, rng);
  for (std::size_t j = dims.hidden_dim; j < 2 * dims.hidden_dim; ++j) {
    p.lstm.bias(0, j) = kForgetBiasInit;
  }
  init_weights(p.head.w_hidden, scheme, dims.hidden_dim, rng);
  init_weights(p.head.w_out, scheme, dims.head_dim, rng);
  return p;
}

Tensor2 embed(const Tensor2& embedding, std::span<const TokenId> ids) {
  Tensor2 out(ids.size(), embedding.cols());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] == 0 || ids[t] > embedding.rows()) {
      throw Error(ErrorKind::kInvalidId, "token id " + std::to_string(ids[t]) +
                                             " outside dictionary of " +
                                             std::to_string(embedding.rows()) + " rows");
    }
    const auto src = embedding.row(embedding_row(ids[t]));
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

LstmState LstmTrace::final_state() const {
  const std::size_t t = steps();
  if (t == 0) return initial;
  const auto h = hidden.row(t - 1);
  const auto c = cells.row(t - 1);
  return {std::vector<double>(h.begin(), h.end()), std::vector<double>(c.begin(), c.end())};
}

LstmTrace lstm_forward(const LstmWeights& w, const Tensor2& inputs, const LstmState& initial) {
  const std::size_t steps = inputs.rows();
  const std::size_t hd = w.hidden_dim();
  if (inputs.cols() != w.input_dim()) throw Error(ErrorKind::kShape, "lstm input width mismatch");
  if (initial.h.size() != hd || initial.c.size() != hd) {
    throw Error(ErrorKind::kShape, "lstm initial state size mismatch");
  }
  LstmTrace tr{initial, Tensor2(steps, 4 * hd), Tensor2(steps, hd), Tensor2(steps, hd),
               Tensor2(steps, hd)};
  const double* bias = w.bias.flat().data();
  for (std::size_t t = 0; t < steps; ++t) {
    const double* h_prev = t == 0 ? initial.h.data() : tr.hidden.row(t - 1).data();
    const double* c_prev = t == 0 ? initial.c.data() : tr.cells.row(t - 1).data();
    double* z = tr.gates.row(t).data();
    std::copy(bias, bias + 4 * hd, z);
    matvec_acc(w.w_input, inputs.row(t).data(), z);
    matvec_acc(w.w_recurrent, h_prev, z);
    double* c = tr.cells.row(t).data();
    double* h = tr.hidden.row(t).data();
    double* tc = tr.tanh_cells.row(t).data();
    for (std::size_t j = 0; j < hd; ++j) {
      const double ig = sigmoid(z[j]);
      const double fg = sigmoid(z[hd + j]);
      const double gg = std::tanh(z[2 * hd + j]);
      const double og = sigmoid(z[3 * hd + j]);
      z[j] = ig;
      z[hd + j] = fg;
      z[2 * hd + j] = gg;
      z[3 * hd + j] = og;
      c[j] = fg * c_prev[j] + ig * gg;
      tc[j] = std::tanh(c[j]);
      h[j] = og * tc[j];
    }
  }
  return tr;
}

void lstm_backward(const LstmWeights& w, const Tensor2& inputs, const LstmTrace& trace,
                   const Tensor2& d_hidden, LstmWeights& grads, Tensor2& d_inputs) {
  const std::size_t steps = trace.steps();
  const std::size_t hd = w.hidden_dim();
  if (d_hidden.rows() != steps || d_hidden.cols() != hd) {
    throw Error(ErrorKind::kShape, "lstm_backward: d_hidden shape mismatch");
  }
  d_inputs = Tensor2(steps, w.input_dim());
  std::vector<double> dc_next(hd, 0.0), dh_next(hd, 0.0), dz(4 * hd);
  double* gb = grads.bias.flat().data();
  for (std::size_t t = steps; t-- > 0;) {
    const double* a = trace.gates.row(t).data();
    const double* tc = trace.tanh_cells.row(t).data();
    const double* c_prev = t == 0 ? trace.initial.c.data() : trace.cells.row(t - 1).data();
    const double* h_prev = t == 0 ? trace.initial.h.data() : trace.hidden.row(t - 1).data();
    const double* dht = d_hidden.row(t).data();
    for (std::size_t j = 0; j < hd; ++j) {
      const double ig = a[j], fg = a[hd + j], gg = a[2 * hd + j], og = a[3 * hd + j];
      const double dhj = dht[j] + dh_next[j];
      const double dcj = dhj * og * (1.0 - tc[j] * tc[j]) + dc_next[j];
      dz[j] = dcj * gg * ig * (1.0 - ig);
      dz[hd + j] = dcj * c_prev[j] * fg * (1.0 - fg);
      dz[2 * hd + j] = dcj * ig * (1.0 - gg * gg);
      dz[3 * hd + j] = dhj * tc[j] * og * (1.0 - og);
      dc_next[j] = dcj * fg;
    }
    outer_acc(grads.w_input, dz.data(), inputs.row(t).data());
    outer_acc(grads.w_recurrent, dz.data(), h_prev);
    for (std::size_t j = 0; j < 4 * hd; ++j) gb[j] += dz[j];
    matvec_t_acc(w.w_input, dz.data(), d_inputs.row(t).data());
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    matvec_t_acc(w.w_recurrent, dz.data(), dh_next.data());
  }
}

ForwardResult forward(const ClassifierParams& params, const Tensor2& embedded) {
  check_embedded(params, embedded);
  ForwardResult out;
  out.trace = lstm_forward(params.lstm, embedded, LstmState::zeros(params.lstm.hidden_dim()));
  const HeadWeights& hw = params.head;
  const std::size_t fd = hw.w_hidden.rows();
  out.head_pre.assign(hw.b_hidden.flat().begin(), hw.b_hidden.flat().end());
  matvec_acc(hw.w_hidden, out.trace.hidden.row(embedded.rows() - 1).data(), out.head_pre.data());
  out.head_act.resize(fd);
  for (std::size_t j = 0; j < fd; ++j) out.head_act[j] = std::max(0.0, out.head_pre[j]);
  std::array<double, kNumClasses> logits{hw.b_out(0, 0), hw.b_out(0, 1)};
  matvec_acc(hw.w_out, out.head_act.data(), logits.data());
  const double m = std::max(logits[0], logits[1]);
  const double lse = m + std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m));
  out.log_probs = {logits[0] - lse, logits[1] - lse};
  if (!std::isfinite(out.log_probs[0]) || !std::isfinite(out.log_probs[1])) {
    throw Error(ErrorKind::kNumericOverflow, "non-finite classifier output");
  }
  return out;
}

LossAndGrads loss_and_grads(const ClassifierParams& params, const Tensor2& embedded, int label) {
  check_label(label);
  ForwardResult fw = forward(params, embedded);
  const std::size_t steps = embedded.rows();
  const std::size_t hd = params.lstm.hidden_dim();
  const std::size_t fd = params.head.w_hidden.rows();

  LossAndGrads out;
  out.nll = -fw.log_probs[static_cast<std::size_t>(label)];
  out.predicted = fw.predicted();
  if (!std::isfinite(out.nll)) throw Error(ErrorKind::kNumericOverflow, "non-finite loss");

  GradientBundle& g = out.grads;
  g.head = HeadWeights::zeros(hd, fd);
  g.lstm = LstmWeights::zeros(params.lstm.input_dim(), hd);

  std::array<double, kNumClasses> d_logits{std::exp(fw.log_probs[0]), std::exp(fw.log_probs[1])};
  d_logits[static_cast<std::size_t>(label)] -= 1.0;
  outer_acc(g.head.w_out, d_logits.data(), fw.head_act.data());
  g.head.b_out(0, 0) = d_logits[0];
  g.head.b_out(0, 1) = d_logits[1];

  std::vector<double> d_head(fd, 0.0);
  matvec_t_acc(params.head.w_out, d_logits.data(), d_head.data());
  for (std::size_t j = 0; j < fd; ++j) {
    if (fw.head_pre[j] <= 0.0) d_head[j] = 0.0;
  }
  const double* h_last = fw.trace.hidden.row(steps - 1).data();
  outer_acc(g.head.w_hidden, d_head.data(), h_last);
  std::copy(d_head.begin(), d_head.end(), g.head.b_hidden.flat().begin());

  Tensor2 d_hidden(steps, hd);
  matvec_t_acc(params.head.w_hidden, d_head.data(), d_hidden.row(steps - 1).data());
  lstm_backward(params.lstm, embedded, fw.trace, d_hidden, g.lstm, g.input_grads);
  return out;
}

Tensor2 input_gradient(const ClassifierParams& params, const Tensor2& embedded, int label) {
  return loss_and_grads(params, embedded, label).grads.input_grads;
}

void accumulate(ClassifierParams& acc, const GradientBundle& bundle,
                std::span<const TokenId> ids, double weight) {
  if (bundle.input_grads.rows() != ids.size()) {
    throw Error(ErrorKind::kShape, "accumulate: ids/input_grads length mismatch");
  }
  acc.lstm.w_input.add_scaled(bundle.lstm.w_input, weight);
  acc.lstm.w_recurrent.add_scaled(bundle.lstm.w_recurrent, weight);
  acc.lstm.bias.add_scaled(bundle.lstm.bias, weight);
  acc.head.w_hidden.add_scaled(bundle.head.w_hidden, weight);
  acc.head.b_hidden.add_scaled(bundle.head.b_hidden, weight);
  acc.head.w_out.add_scaled(bundle.head.w_out, weight);
  acc.head.b_out.add_scaled(bundle.head.b_out, weight);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    auto dst = acc.embedding.row(embedding_row(ids[t]));
    const auto src = bundle.input_grads.row(t);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += weight * src[c];
  }
}

}  // namespace advtext
