#include "advtext/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "advtext/error.hpp"

namespace advtext {

void TrainConfig::validate() const {
  if (lambda < 0.0) throw Error(ErrorKind::kInvalidConfig, "lambda must be >= 0");
  if (batch_size == 0) throw Error(ErrorKind::kInvalidConfig, "batch size must be >= 1");
  if (!(clip_norm > 0.0)) throw Error(ErrorKind::kInvalidConfig, "clip norm must be > 0");
  if (attack) attack->validate();
}

TrainState::TrainState(ClassifierParams p, const TrainConfig& config)
    : params(std::move(p)), adam(std::as_const(params).tensors(), config.adam) {
  if (config.attack && config.attack->needs_index()) {
    index = std::make_shared<const NeighborIndex>(
        build_index(params.embedding, config.attack->k_neighbors, 0));
  }
}

BatchGradient batch_gradient_with(const ClassifierParams& params,
                                  std::span<const LabeledSequence> batch,
                                  std::span<const PerturbationSet> perturbations, double lambda) {
  if (batch.empty()) throw Error(ErrorKind::kEmptyInput, "empty batch");
  if (!perturbations.empty() && perturbations.size() != batch.size()) {
    throw Error(ErrorKind::kPairing, "one perturbation per batch example required");
  }
  BatchGradient out{ClassifierParams::zeros(params.dims()), {}};
  const double w = 1.0 / static_cast<double>(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto& ex = batch[j];
    const Tensor2 x = embed(params.embedding, ex.ids);
    const LossAndGrads clean = loss_and_grads(params, x, ex.label);
    accumulate(out.grads, clean.grads, ex.ids, w);
    out.metrics.clean_loss += w * clean.nll;
    if (perturbations.empty()) continue;
    const PerturbationSet& d = perturbations[j];
    if (d.zero_gradient) {
      ++out.metrics.attack_failures;
      continue;
    }
    const LossAndGrads adv = loss_and_grads(params, apply_perturbation(x, d), ex.label);
    accumulate(out.grads, adv.grads, ex.ids, lambda * w);
    out.metrics.adversarial_loss += w * adv.nll;
  }
  out.metrics.total_loss = out.metrics.clean_loss + lambda * out.metrics.adversarial_loss;
  return out;
}

BatchGradient batch_gradient(const ClassifierParams& params, std::span<const LabeledSequence> batch,
                             const TrainConfig& config, const NeighborIndex* index) {
  if (!config.attack) return batch_gradient_with(params, batch, {}, config.lambda);
  const FrozenParams frozen(params);
  std::vector<PerturbationSet> perturbations;
  perturbations.reserve(batch.size());
  for (const auto& ex : batch) {
    const Tensor2 x = embed(frozen.get().embedding, ex.ids);
    perturbations.push_back(
        craft_perturbation(*config.attack, frozen, x, ex.ids, index, ex.label));
  }
  return batch_gradient_with(params, batch, perturbations, config.lambda);
}

StepMetrics train_step(TrainState& state, std::span<const LabeledSequence> batch,
                       const TrainConfig& config) {
  if (config.attack && config.attack->needs_index()) {
    state.index = refresh_if_due(state.index, state.params.embedding, state.batch_counter,
                                 config.attack->refresh_interval);
  }
  BatchGradient bg = batch_gradient(state.params, batch, config, state.index.get());
  bg.metrics.grad_norm = clip_gradients(bg.grads, config.clip_norm);
  adam_step(state.params, bg.grads, state.adam);
  ++state.batch_counter;
  return bg.metrics;
}

EvalResult evaluate(const Predictor& predict, const Split& split) {
  EvalResult r;
  r.total = split.size();
  if (r.total == 0) return r;
  for (const auto& ex : split) {
    if (predict(ex) == ex.label) ++r.correct;
  }
  r.accuracy = 100.0 * static_cast<double>(r.correct) / static_cast<double>(r.total);
  r.error_rate = 100.0 - r.accuracy;
  return r;
}

EvalResult evaluate(const ClassifierParams& params, const Split& split) {
  return evaluate(
      [&params](const LabeledSequence& ex) {
        return forward(params, embed(params.embedding, ex.ids)).predicted();
      },
      split);
}

TrainReport train(ClassifierParams& params, const Split& train_split, const Split& dev_split,
                  const Split& test_split, const TrainConfig& config) {
  config.validate();
  if (train_split.empty()) throw Error(ErrorKind::kEmptySplit, "empty training split");
  if (dev_split.empty()) throw Error(ErrorKind::kEmptySplit, "empty dev split");

  TrainReport report;
  TrainState state(params, config);
  ClassifierParams best = state.params;
  report.best_dev_accuracy = -1.0;
  std::size_t stale = 0;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_split.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<LabeledSequence> batch;

  for (std::size_t epoch = 0; epoch < config.epochs && !report.diverged; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_split[order[i]]);
      try {
        const StepMetrics m = train_step(state, batch, config);
        if (!std::isfinite(m.total_loss)) {
          report.diverged = true;
          break;
        }
        loss += m.total_loss;
        ++batches;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumericOverflow) throw;
        report.diverged = true;
        break;
      }
    }
    if (report.diverged || !state.params.all_finite()) {
      report.diverged = true;
      break;
    }
    report.epoch_train_loss.push_back(loss / static_cast<double>(batches));
    const double dev_acc = evaluate(state.params, dev_split).accuracy;
    report.epoch_dev_accuracy.push_back(dev_acc);
    if (dev_acc > report.best_dev_accuracy) {
      report.best_dev_accuracy = dev_acc;
      report.best_epoch = epoch;
      best = state.params;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  params = std::move(best);
  if (!test_split.empty()) report.test = evaluate(params, test_split);
  return report;
}

void pretrain_init(ClassifierParams& classifier, const LMParams& lm) {
  if (!classifier.embedding.same_shape(lm.embedding) ||
      !classifier.lstm.w_input.same_shape(lm.lstm.w_input) ||
      !classifier.lstm.w_recurrent.same_shape(lm.lstm.w_recurrent)) {
    throw Error(ErrorKind::kInvalidCheckpoint,
                "LM dimensions do not match the classifier (vocab rows, embed dim, hidden dim)");
  }
  classifier.embedding = lm.embedding;
  classifier.lstm = lm.lstm;
}

}  // namespace advtext
