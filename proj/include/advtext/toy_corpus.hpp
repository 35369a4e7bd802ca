#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "advtext/corpus.hpp"

namespace advtext {

struct ToyCorpus {
  std::vector<RawExample> train;
  std::vector<RawExample> test;
};

/// Synthetic movie-review sentiment corpus: templated sentences mixing
/// opinions (mostly agreeing with the label, some negated) with neutral plot
/// talk. Reviews are 10-60 tokens long, labels alternate, vocabulary is
/// roughly 500 words. Deterministic for a given seed.
ToyCorpus generate_toy_corpus(std::uint64_t seed, std::size_t num_train = 2000,
                              std::size_t num_test = 500);

}  // namespace advtext
