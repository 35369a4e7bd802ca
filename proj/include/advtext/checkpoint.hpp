#pragma once

#include <cstdint>
#include <filesystem>

#include "advtext/lm.hpp"
#include "advtext/nn.hpp"

namespace advtext {

/// Binary layout: "ADVT1", then little-endian uint32 header
///   kind (0 classifier, 1 LM), vocab_rows, embed_dim, hidden_dim, head_dim
/// (head_dim is 0 for an LM), then every tensor as raw little-endian float64
/// in declaration order. A JSON sidecar `<path>.json` records the dims and
/// the seed.
enum class CheckpointKind : std::uint32_t { kClassifier = 0, kLanguageModel = 1 };

void save_classifier(const std::filesystem::path& path, const ClassifierParams& params,
                     std::uint64_t seed);
ClassifierParams load_classifier(const std::filesystem::path& path);

void save_lm(const std::filesystem::path& path, const LMParams& params, std::uint64_t seed);
LMParams load_lm(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace advtext
