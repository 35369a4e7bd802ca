#include "advtext/optim.hpp"

#include <cmath>

#include "advtext/error.hpp"

namespace advtext {

AdamState::AdamState(std::span<const Tensor2* const> params, AdamConfig config)
    : config_(config), lr_(config.learning_rate) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Tensor2* p : params) {
    m_.push_back(Tensor2::zeros_like(*p));
    v_.push_back(Tensor2::zeros_like(*p));
  }
}

void AdamState::step(std::span<Tensor2* const> params, std::span<const Tensor2* const> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw Error(ErrorKind::kShape, "adam: parameter list length mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(m_[i]) || !grads[i]->same_shape(m_[i])) {
      throw Error(ErrorKind::kShape, "adam: tensor " + std::to_string(i) + " shape mismatch");
    }
  }
  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->flat();
    const auto g = grads[i]->flat();
    auto m = m_[i].flat();
    auto v = v_[i].flat();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      p[j] -= lr_ * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

double global_norm(std::span<const Tensor2* const> grads) {
  double s = 0.0;
  for (const Tensor2* g : grads) s += g->squared_norm();
  return std::sqrt(s);
}

double clip_gradients(std::span<Tensor2* const> grads, double max_norm) {
  if (!(max_norm > 0.0)) throw Error(ErrorKind::kInvalidConfig, "clip max_norm must be > 0");
  double s = 0.0;
  for (const Tensor2* g : grads) s += g->squared_norm();
  const double norm = std::sqrt(s);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (Tensor2* g : grads) g->scale(factor);
  }
  return norm;
}

}  // namespace advtext
