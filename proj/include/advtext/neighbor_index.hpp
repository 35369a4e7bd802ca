#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "advtext/nn.hpp"
#include "advtext/tensor.hpp"

namespace advtext {

/// Hash of the embedding contents, used to detect a stale index.
std::uint64_t embedding_fingerprint(const Tensor2& embedding);

/// Per-word top-K neighbours by cosine similarity, with unit direction
/// vectors u = (v_j - v_i) / |v_j - v_i|. Covers ids 1..|V|; the eos row
/// (last row of the dictionary) is never indexed nor a neighbour.
class NeighborIndex {
 public:
  struct Entry {
    std::vector<TokenId> neighbors;  // descending cosine, ties by lower id
    std::vector<double> cosines;
    Tensor2 directions;              // one unit row per neighbour
  };

  NeighborIndex(std::size_t k, std::vector<Entry> entries, std::size_t built_at_batch,
                std::uint64_t fingerprint)
      : k_(k), entries_(std::move(entries)), built_at_batch_(built_at_batch),
        fingerprint_(fingerprint) {}

  std::size_t k() const { return k_; }
  std::size_t num_words() const { return entries_.size(); }
  std::size_t built_at_batch() const { return built_at_batch_; }
  std::uint64_t fingerprint() const { return fingerprint_; }

  bool covers(TokenId id) const { return id >= 1 && id <= entries_.size(); }
  /// Throws kInvalidId when `id` is not indexed.
  const Entry& entry(TokenId id) const;

 private:
  std::size_t k_;
  std::vector<Entry> entries_;
  std::size_t built_at_batch_;
  std::uint64_t fingerprint_;
};

using IndexSnapshot = std::shared_ptr<const NeighborIndex>;

/// Exact exhaustive search. Candidates whose embedding equals v_i are
/// skipped; a zero row throws kDegenerateEmbedding.
NeighborIndex build_index(const Tensor2& embedding, std::size_t k, std::size_t built_at_batch = 0);

/// Rebuilds when batch_counter - built_at_batch >= interval, otherwise hands
/// back `current`.
IndexSnapshot refresh_if_due(const IndexSnapshot& current, const Tensor2& embedding,
                             std::size_t batch_counter, std::size_t interval);

struct DirectionChoice {
  std::size_t slot = 0;
  double dot = 0.0;
};

/// argmax_j (vector . u_j), ties to the lower slot. Empty for a zero vector
/// or a word without neighbours.
std::optional<DirectionChoice> best_direction(const NeighborIndex& index, TokenId word,
                                              std::span<const double> vector);

}  // namespace advtext
