#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "advtext/neighbor_index.hpp"
#include "advtext/nn.hpp"

namespace advtext {

enum class AttackMethod { kAdvT, kIAdvT, kSpgd };

std::string_view to_string(AttackMethod method);
/// "advt", "iadvt" or "spgd"; anything else throws kUsage.
AttackMethod parse_attack_method(std::string_view name);

struct AttackConfig {
  AttackMethod method = AttackMethod::kSpgd;
  double epsilon = 25.0;
  std::size_t k_neighbors = 15;  // iadvt, spgd
  double sigma = 0.75;           // spgd
  std::size_t m_steps = 1;       // spgd
  std::size_t refresh_interval = 50;
  bool clamp_away_moves = false;  // spgd: zero tokens whose best projection is negative

  /// advt eps=5; iadvt eps=15, K=15; spgd eps=25, K=15, sigma=0.75, M=1.
  static AttackConfig defaults(AttackMethod method);
  bool needs_index() const { return method != AttackMethod::kAdvT; }
  void validate() const;
};

struct PerturbationSet {
  Tensor2 vectors;  // T x D
  std::vector<double> raw_norms;
  std::vector<bool> kept;
  std::vector<std::optional<TokenId>> chosen_neighbor;  // spgd only
  bool zero_gradient = false;  // the attack found no ascent direction

  static PerturbationSet zeros(std::size_t steps, std::size_t dim);
  std::size_t steps() const { return vectors.rows(); }
  std::size_t kept_count() const;
  double magnitude(std::size_t t) const { return l2_norm(vectors.row(t)); }
};

/// Whole-sequence normalised gradient step: d = eps * grad(nll) / |grad(nll)|.
PerturbationSet advt_perturb(const FrozenParams& frozen, const Tensor2& embedded, int label,
                             double epsilon);

/// d log p / d alpha at alpha = 0 for d_i = sum_k alpha_{i,k} u_i^(k); one
/// row per token, one column per neighbour slot (rows may be shorter when a
/// word has fewer than K neighbours).
std::vector<std::vector<double>> alpha_gradient(const FrozenParams& frozen, const Tensor2& embedded,
                                                std::span<const TokenId> ids,
                                                const NeighborIndex& index, int label);

/// Perturbation restricted to the span of each word's neighbour directions,
/// alpha = -eps * g_alpha / |g_alpha| over the whole sequence.
PerturbationSet iadvt_perturb(const FrozenParams& frozen, const Tensor2& embedded,
                              std::span<const TokenId> ids, const NeighborIndex& index, int label,
                              double epsilon);

struct RawPerturbation {
  Tensor2 vectors;               // T x D, r
  std::vector<double> norms;     // |r_i|
  std::vector<double> saliency;  // sum over steps of |grad_i|, used to rank tokens
};

/// `m_steps` per-token normalised ascent steps of size eps / m_steps; every
/// |r_i| is capped at eps.
RawPerturbation spgd_raw_steps(const FrozenParams& frozen, const Tensor2& embedded, int label,
                               double epsilon, std::size_t m_steps);

/// floor((1 - sigma) * n).
std::size_t keep_count(std::size_t n, double sigma);

/// Keeps the keep_count(n, sigma) largest scores, ties to the earlier position.
std::vector<bool> sparsify(std::span<const double> scores, double sigma);

/// As above, but equal scores are ordered by the larger `tiebreak` first and
/// only then by position. Scores within 1e-9 * max|score| count as equal.
std::vector<bool> sparsify(std::span<const double> scores, std::span<const double> tiebreak,
                           double sigma);

struct Projection {
  std::vector<double> vector;  // (r . u*) u*
  std::optional<TokenId> neighbor;
  double coefficient = 0.0;  // r . u*
};

/// Projects r onto the neighbour direction with the largest dot product.
/// A zero r (or a word without neighbours) gives a zero projection.
Projection project(std::span<const double> r, const NeighborIndex& index, TokenId word);

/// Raw steps, then sparsification by raw norm (gradient saliency among equal
/// norms), then projection of the surviving tokens.
PerturbationSet spgd_perturb(const FrozenParams& frozen, const Tensor2& embedded,
                             std::span<const TokenId> ids, const NeighborIndex& index, int label,
                             const AttackConfig& config);

/// Dispatches on config.method. `index` may be null for advt.
PerturbationSet craft_perturbation(const AttackConfig& config, const FrozenParams& frozen,
                                   const Tensor2& embedded, std::span<const TokenId> ids,
                                   const NeighborIndex* index, int label);

/// embedded + perturbation.vectors
Tensor2 apply_perturbation(const Tensor2& embedded, const PerturbationSet& perturbation);

}  // namespace advtext
