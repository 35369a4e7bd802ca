#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "advtext/attacks.hpp"
#include "advtext/corpus.hpp"
#include "advtext/lm.hpp"
#include "advtext/neighbor_index.hpp"
#include "advtext/nn.hpp"
#include "advtext/optim.hpp"

namespace advtext {

struct TrainConfig {
  double lambda = 1.0;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double clip_norm = 4.0;
  std::size_t patience = 3;  // epochs without dev-accuracy improvement
  std::optional<AttackConfig> attack;
  std::uint64_t seed = 1;
  InitScheme init = InitScheme::kLecunGaussian;
  AdamConfig adam{};

  bool adversarial() const { return attack.has_value(); }
  void validate() const;
};

struct StepMetrics {
  double clean_loss = 0.0;        // mean over the batch
  double adversarial_loss = 0.0;  // mean over attacked examples
  double total_loss = 0.0;        // clean + lambda * adversarial
  double grad_norm = 0.0;         // before clipping
  std::size_t attack_failures = 0;
};

/// Mutable training state for one classifier: weights, optimizer moments,
/// neighbour snapshot and the batch counter that drives index refreshes.
struct TrainState {
  ClassifierParams params;
  AdamState adam;
  IndexSnapshot index;
  std::size_t batch_counter = 0;

  TrainState(ClassifierParams p, const TrainConfig& config);
};

/// Full-shape gradient of the batch objective mean(L) + lambda * mean(L_adv)
/// with the perturbations held constant, crafted against a frozen copy of
/// `params`.
struct BatchGradient {
  ClassifierParams grads;
  StepMetrics metrics;
};

BatchGradient batch_gradient(const ClassifierParams& params, std::span<const LabeledSequence> batch,
                             const TrainConfig& config, const NeighborIndex* index);

/// Batch gradient over fixed, caller-supplied perturbations (one per example,
/// same order). Used to check the joint objective with d held constant.
BatchGradient batch_gradient_with(const ClassifierParams& params,
                                  std::span<const LabeledSequence> batch,
                                  std::span<const PerturbationSet> perturbations, double lambda);

/// One optimisation step: refresh the index if due, craft, backprop, clip,
/// Adam update.
StepMetrics train_step(TrainState& state, std::span<const LabeledSequence> batch,
                       const TrainConfig& config);

struct EvalResult {
  double accuracy = 0.0;    // percent
  double error_rate = 0.0;  // percent; accuracy + error_rate == 100
  std::size_t correct = 0;
  std::size_t total = 0;
};

using Predictor = std::function<int(const LabeledSequence&)>;

EvalResult evaluate(const Predictor& predict, const Split& split);
EvalResult evaluate(const ClassifierParams& params, const Split& split);

struct TrainReport {
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_dev_accuracy;
  std::size_t best_epoch = 0;
  double best_dev_accuracy = 0.0;
  EvalResult test;
  bool diverged = false;
};

/// Epoch loop with shuffling, early stopping on dev accuracy and best-weights
/// restore. `params` ends holding the best-dev weights.
TrainReport train(ClassifierParams& params, const Split& train_split, const Split& dev_split,
                  const Split& test_split, const TrainConfig& config);

/// Copies the LM's embedding dictionary and LSTM weights into `classifier`.
/// The head is left as is.
void pretrain_init(ClassifierParams& classifier, const LMParams& lm);

}  // namespace advtext
