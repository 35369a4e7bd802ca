#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "advtext/tensor.hpp"

namespace advtext {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double lr_decay = 0.9999;
};

/// Moment accumulators shaped like the parameter list they were built for.
class AdamState {
 public:
  AdamState(std::span<const Tensor2* const> params, AdamConfig config = {});

  const AdamConfig& config() const { return config_; }
  double learning_rate() const { return lr_; }
  std::uint64_t step_count() const { return steps_; }
  const std::vector<Tensor2>& first_moments() const { return m_; }
  const std::vector<Tensor2>& second_moments() const { return v_; }

  /// Called when validation perplexity failed to improve.
  void decay_learning_rate() { lr_ *= config_.lr_decay; }

  void step(std::span<Tensor2* const> params, std::span<const Tensor2* const> grads);

 private:
  AdamConfig config_;
  double lr_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor2> m_;
  std::vector<Tensor2> v_;
};

/// Bias-corrected Adam update of `params` in place.
template <class Params>
void adam_step(Params& params, const Params& grads, AdamState& state) {
  state.step(params.tensors(), grads.tensors());
}

double global_norm(std::span<const Tensor2* const> grads);

/// Rescales all tensors by max_norm / norm when their joint L2 norm exceeds
/// max_norm. Returns the norm before clipping.
double clip_gradients(std::span<Tensor2* const> grads, double max_norm);

template <class Params>
double clip_gradients(Params& grads, double max_norm) {
  return clip_gradients(grads.tensors(), max_norm);
}

}  // namespace advtext
