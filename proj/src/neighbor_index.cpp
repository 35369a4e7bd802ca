#include "advtext/neighbor_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "advtext/error.hpp"

namespace advtext {

std::uint64_t embedding_fingerprint(const Tensor2& embedding) {
  // FNV-1a over the raw bytes plus the shape.
  std::uint64_t h = 1469598103934665603ull;
  const auto mix = [&h](const unsigned char* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  const std::uint64_t shape[2] = {embedding.rows(), embedding.cols()};
  mix(reinterpret_cast<const unsigned char*>(shape), sizeof(shape));
  const auto flat = embedding.flat();
  mix(reinterpret_cast<const unsigned char*>(flat.data()), flat.size() * sizeof(double));
  return h;
}

const NeighborIndex::Entry& NeighborIndex::entry(TokenId id) const {
  if (!covers(id)) throw Error(ErrorKind::kInvalidId, "word " + std::to_string(id) + " not indexed");
  return entries_[id - 1];
}

NeighborIndex build_index(const Tensor2& embedding, std::size_t k, std::size_t built_at_batch) {
  if (embedding.rows() < 2) throw Error(ErrorKind::kInvalidConfig, "dictionary has no words");
  const std::size_t words = embedding.rows() - 1;  // last row is eos
  const std::size_t dim = embedding.cols();
  if (k < 1 || k >= words) {
    throw Error(ErrorKind::kInvalidConfig, "k must satisfy 1 <= k < |V| (k=" + std::to_string(k) +
                                               ", |V|=" + std::to_string(words) + ")");
  }
  std::vector<double> norms(words);
  for (std::size_t i = 0; i < words; ++i) {
    norms[i] = l2_norm(embedding.row(i));
    if (norms[i] == 0.0) {
      throw Error(ErrorKind::kDegenerateEmbedding,
                  "embedding of word " + std::to_string(i + 1) + " is all zero");
    }
  }

  std::vector<NeighborIndex::Entry> entries(words);
  std::vector<double> cos(words);
  std::vector<std::size_t> cand;
  cand.reserve(words);
  for (std::size_t i = 0; i < words; ++i) {
    const auto vi = embedding.row(i);
    cand.clear();
    for (std::size_t j = 0; j < words; ++j) {
      if (j == i) continue;
      const auto vj = embedding.row(j);
      if (std::equal(vi.begin(), vi.end(), vj.begin())) continue;
      cos[j] = dot(vi, vj) / (norms[i] * norms[j]);
      cand.push_back(j);
    }
    const std::size_t take = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                      [&cos](std::size_t a, std::size_t b) {
                        return cos[a] > cos[b] || (cos[a] == cos[b] && a < b);
                      });
    auto& e = entries[i];
    e.directions = Tensor2(take, dim);
    for (std::size_t s = 0; s < take; ++s) {
      const std::size_t j = cand[s];
      e.neighbors.push_back(static_cast<TokenId>(j + 1));
      e.cosines.push_back(cos[j]);
      auto u = e.directions.row(s);
      const auto vj = embedding.row(j);
      for (std::size_t c = 0; c < dim; ++c) u[c] = vj[c] - vi[c];
      const double n = l2_norm(u);
      for (double& x : u) x /= n;
    }
  }
  return NeighborIndex(k, std::move(entries), built_at_batch, embedding_fingerprint(embedding));
}

IndexSnapshot refresh_if_due(const IndexSnapshot& current, const Tensor2& embedding,
                             std::size_t batch_counter, std::size_t interval) {
  if (interval == 0) throw Error(ErrorKind::kInvalidConfig, "refresh interval must be >= 1");
  if (!current) throw Error(ErrorKind::kInvalidConfig, "refresh_if_due needs an initial index");
  if (batch_counter < current->built_at_batch() + interval) return current;
  return std::make_shared<const NeighborIndex>(build_index(embedding, current->k(), batch_counter));
}

std::optional<DirectionChoice> best_direction(const NeighborIndex& index, TokenId word,
                                              std::span<const double> vector) {
  const auto& e = index.entry(word);
  if (e.directions.cols() != 0 && vector.size() != e.directions.cols()) {
    throw Error(ErrorKind::kShape, "best_direction: vector width mismatch");
  }
  if (std::all_of(vector.begin(), vector.end(), [](double v) { return v == 0.0; })) {
    return std::nullopt;
  }
  std::optional<DirectionChoice> best;
  for (std::size_t s = 0; s < e.directions.rows(); ++s) {
    const double d = dot(vector, e.directions.row(s));
    if (!best || d > best->dot) best = DirectionChoice{s, d};
  }
  return best;
}

}  // namespace advtext
