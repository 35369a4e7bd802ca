#include "advtext/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "advtext/error.hpp"

namespace advtext {
namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorKind::kInvalidConfig, "epsilon must be finite and >= 0");
  }
}

void check_ids(const Tensor2& embedded, std::span<const TokenId> ids, const NeighborIndex& index) {
  if (ids.size() != embedded.rows()) {
    throw Error(ErrorKind::kShape, "ids and embedded sequence lengths differ");
  }
  for (TokenId id : ids) {
    if (!index.covers(id)) {
      throw Error(ErrorKind::kInvalidId, "word " + std::to_string(id) + " not covered by index");
    }
  }
}

}  // namespace

std::string_view to_string(AttackMethod method) {
  switch (method) {
    case AttackMethod::kAdvT: return "advt";
    case AttackMethod::kIAdvT: return "iadvt";
    case AttackMethod::kSpgd: return "spgd";
  }
  return "unknown";
}

AttackMethod parse_attack_method(std::string_view name) {
  if (name == "advt") return AttackMethod::kAdvT;
  if (name == "iadvt") return AttackMethod::kIAdvT;
  if (name == "spgd") return AttackMethod::kSpgd;
  throw Error(ErrorKind::kUsage, "unknown attack method '" + std::string(name) + "'");
}

AttackConfig AttackConfig::defaults(AttackMethod method) {
  AttackConfig c;
  c.method = method;
  switch (method) {
    case AttackMethod::kAdvT: c.epsilon = 5.0; break;
    case AttackMethod::kIAdvT: c.epsilon = 15.0; c.k_neighbors = 15; break;
    case AttackMethod::kSpgd:
      c.epsilon = 25.0;
      c.k_neighbors = 15;
      c.sigma = 0.75;
      c.m_steps = 1;
      break;
  }
  return c;
}

void AttackConfig::validate() const {
  check_epsilon(epsilon);
  if (sigma < 0.0 || sigma > 1.0) throw Error(ErrorKind::kInvalidConfig, "sigma must be in [0, 1]");
  if (m_steps < 1) throw Error(ErrorKind::kInvalidConfig, "m_steps must be >= 1");
  if (needs_index() && k_neighbors < 1) throw Error(ErrorKind::kInvalidConfig, "k must be >= 1");
  if (refresh_interval < 1) throw Error(ErrorKind::kInvalidConfig, "refresh interval must be >= 1");
}

PerturbationSet PerturbationSet::zeros(std::size_t steps, std::size_t dim) {
  return {Tensor2(steps, dim), std::vector<double>(steps, 0.0), std::vector<bool>(steps, false),
          std::vector<std::optional<TokenId>>(steps), false};
}

std::size_t PerturbationSet::kept_count() const {
  return static_cast<std::size_t>(std::count(kept.begin(), kept.end(), true));
}

PerturbationSet advt_perturb(const FrozenParams& frozen, const Tensor2& embedded, int label,
                             double epsilon) {
  check_epsilon(epsilon);
  const Tensor2 g = input_gradient(frozen.get(), embedded, label);
  PerturbationSet out = PerturbationSet::zeros(embedded.rows(), embedded.cols());
  const double norm = std::sqrt(g.squared_norm());
  if (norm == 0.0) {
    out.zero_gradient = true;
    return out;
  }
  // g is the gradient of the NLL, so +g ascends the loss.
  out.vectors = g;
  out.vectors.scale(epsilon / norm);
  for (std::size_t t = 0; t < out.steps(); ++t) {
    out.raw_norms[t] = out.magnitude(t);
    out.kept[t] = true;
  }
  return out;
}

std::vector<std::vector<double>> alpha_gradient(const FrozenParams& frozen, const Tensor2& embedded,
                                                std::span<const TokenId> ids,
                                                const NeighborIndex& index, int label) {
  check_ids(embedded, ids, index);
  const Tensor2 g_nll = input_gradient(frozen.get(), embedded, label);
  std::vector<std::vector<double>> out(ids.size());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const auto& dirs = index.entry(ids[t]).directions;
    out[t].resize(dirs.rows());
    for (std::size_t k = 0; k < dirs.rows(); ++k) out[t][k] = -dot(dirs.row(k), g_nll.row(t));
  }
  return out;
}

PerturbationSet iadvt_perturb(const FrozenParams& frozen, const Tensor2& embedded,
                              std::span<const TokenId> ids, const NeighborIndex& index, int label,
                              double epsilon) {
  check_epsilon(epsilon);
  const auto g_alpha = alpha_gradient(frozen, embedded, ids, index, label);
  PerturbationSet out = PerturbationSet::zeros(embedded.rows(), embedded.cols());
  double sq = 0.0;
  for (const auto& row : g_alpha) {
    for (double v : row) sq += v * v;
  }
  if (sq == 0.0) {
    out.zero_gradient = true;
    return out;
  }
  const double scale = -epsilon / std::sqrt(sq);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const auto& dirs = index.entry(ids[t]).directions;
    auto d = out.vectors.row(t);
    for (std::size_t k = 0; k < dirs.rows(); ++k) {
      const double alpha = scale * g_alpha[t][k];
      const auto u = dirs.row(k);
      for (std::size_t c = 0; c < d.size(); ++c) d[c] += alpha * u[c];
    }
    out.raw_norms[t] = out.magnitude(t);
    out.kept[t] = true;
  }
  return out;
}

RawPerturbation spgd_raw_steps(const FrozenParams& frozen, const Tensor2& embedded, int label,
                               double epsilon, std::size_t m_steps) {
  check_epsilon(epsilon);
  if (m_steps < 1) throw Error(ErrorKind::kInvalidConfig, "m_steps must be >= 1");
  const std::size_t steps = embedded.rows();
  RawPerturbation raw{Tensor2(steps, embedded.cols()), std::vector<double>(steps, 0.0),
                      std::vector<double>(steps, 0.0)};
  const double step = epsilon / static_cast<double>(m_steps);
  Tensor2 x = embedded;
  for (std::size_t m = 0; m < m_steps; ++m) {
    const Tensor2 g = input_gradient(frozen.get(), x, label);
    for (std::size_t t = 0; t < steps; ++t) {
      const auto gt = g.row(t);
      const double n = l2_norm(gt);
      if (n == 0.0) continue;
      raw.saliency[t] += n;
      auto rt = raw.vectors.row(t);
      for (std::size_t c = 0; c < rt.size(); ++c) rt[c] += step * gt[c] / n;
    }
    x = embedded;
    x.add_scaled(raw.vectors);
  }
  for (std::size_t t = 0; t < steps; ++t) {
    auto rt = raw.vectors.row(t);
    double n = l2_norm(rt);
    if (n > epsilon) {
      for (double& v : rt) v *= epsilon / n;
      n = l2_norm(rt);
    }
    raw.norms[t] = n;
  }
  return raw;
}

std::size_t keep_count(std::size_t n, double sigma) {
  if (sigma < 0.0 || sigma > 1.0) throw Error(ErrorKind::kInvalidConfig, "sigma must be in [0, 1]");
  // the guard absorbs representation error such as (1 - 0.9) * 10 = 0.999...
  const double raw = (1.0 - sigma) * static_cast<double>(n);
  return std::min(n, static_cast<std::size_t>(std::floor(raw + 1e-9)));
}

std::vector<bool> sparsify(std::span<const double> scores, double sigma) {
  const std::size_t keep = keep_count(scores.size(), sigma);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<bool> mask(scores.size(), false);
  for (std::size_t i = 0; i < keep; ++i) mask[order[i]] = true;
  return mask;
}

std::vector<bool> sparsify(std::span<const double> scores, std::span<const double> tiebreak,
                           double sigma) {
  if (tiebreak.size() != scores.size()) {
    throw Error(ErrorKind::kShape, "sparsify: scores and tiebreak differ in length");
  }
  const std::size_t keep = keep_count(scores.size(), sigma);
  double top = 0.0;
  for (double s : scores) top = std::max(top, std::abs(s));
  std::vector<long long> level(scores.size(), 0);
  if (top > 0.0) {
    for (std::size_t i = 0; i < scores.size(); ++i) level[i] = std::llround(scores[i] / top * 1e9);
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (level[a] != level[b]) return level[a] > level[b];
    return tiebreak[a] > tiebreak[b];
  });
  std::vector<bool> mask(scores.size(), false);
  for (std::size_t i = 0; i < keep; ++i) mask[order[i]] = true;
  return mask;
}

Projection project(std::span<const double> r, const NeighborIndex& index, TokenId word) {
  Projection p;
  p.vector.assign(r.size(), 0.0);
  const auto choice = best_direction(index, word, r);
  if (!choice) return p;
  const auto& e = index.entry(word);
  const auto u = e.directions.row(choice->slot);
  p.coefficient = choice->dot;
  p.neighbor = e.neighbors[choice->slot];
  for (std::size_t c = 0; c < r.size(); ++c) p.vector[c] = p.coefficient * u[c];
  return p;
}

PerturbationSet spgd_perturb(const FrozenParams& frozen, const Tensor2& embedded,
                             std::span<const TokenId> ids, const NeighborIndex& index, int label,
                             const AttackConfig& config) {
  config.validate();
  check_ids(embedded, ids, index);
  const RawPerturbation raw =
      spgd_raw_steps(frozen, embedded, label, config.epsilon, config.m_steps);
  PerturbationSet out = PerturbationSet::zeros(embedded.rows(), embedded.cols());
  out.raw_norms = raw.norms;
  if (std::all_of(raw.saliency.begin(), raw.saliency.end(), [](double s) { return s == 0.0; })) {
    out.zero_gradient = true;
    return out;
  }
  const std::vector<bool> mask = sparsify(raw.norms, raw.saliency, config.sigma);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (!mask[t] || raw.norms[t] == 0.0) continue;
    Projection p = project(raw.vectors.row(t), index, ids[t]);
    if (!p.neighbor) continue;
    if (config.clamp_away_moves && p.coefficient < 0.0) continue;
    std::copy(p.vector.begin(), p.vector.end(), out.vectors.row(t).begin());
    out.kept[t] = true;
    out.chosen_neighbor[t] = p.neighbor;
  }
  return out;
}

PerturbationSet craft_perturbation(const AttackConfig& config, const FrozenParams& frozen,
                                   const Tensor2& embedded, std::span<const TokenId> ids,
                                   const NeighborIndex* index, int label) {
  if (config.needs_index() && index == nullptr) {
    throw Error(ErrorKind::kInvalidConfig,
                std::string(to_string(config.method)) + " requires a neighbour index");
  }
  switch (config.method) {
    case AttackMethod::kAdvT: return advt_perturb(frozen, embedded, label, config.epsilon);
    case AttackMethod::kIAdvT:
      return iadvt_perturb(frozen, embedded, ids, *index, label, config.epsilon);
    case AttackMethod::kSpgd: return spgd_perturb(frozen, embedded, ids, *index, label, config);
  }
  throw Error(ErrorKind::kUsage, "unknown attack method");
}

Tensor2 apply_perturbation(const Tensor2& embedded, const PerturbationSet& perturbation) {
  Tensor2 out = embedded;
  out.add_scaled(perturbation.vectors);
  return out;
}

}  // namespace advtext
