#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "advtext/attacks.hpp"
#include "advtext/corpus.hpp"
#include "advtext/neighbor_index.hpp"
#include "advtext/nn.hpp"

namespace advtext {

struct Discretization {
  std::vector<TokenId> discretized;  // neighbour the perturbation moved toward
  std::vector<TokenId> nearest;      // word nearest (Euclidean) to v_i + d_i
};

/// Maps each perturbed token to the neighbour whose unit direction has the
/// highest cosine with d_i; tokens with a zero perturbation, or that moved
/// toward no neighbour (best cosine <= 0), keep their original word.
/// Throws kStaleIndex when `index` was built from a different `embedding`.
Discretization discretize(const PerturbationSet& perturbation, std::span<const TokenId> ids,
                          const NeighborIndex& index, const Tensor2& embedding);

struct AdversarialExample {
  std::vector<TokenId> original;
  int label = 0;
  AttackMethod method = AttackMethod::kSpgd;
  PerturbationSet perturbation;
  std::vector<double> magnitudes;  // |d_i|
  Discretization tokens;
  std::optional<int> clean_prediction;
  std::optional<int> adversarial_prediction;
  std::uint64_t index_fingerprint = 0;
  std::size_t index_k = 0;
};

AdversarialExample make_example(std::span<const TokenId> ids, int label, AttackMethod method,
                                PerturbationSet perturbation, const NeighborIndex& index,
                                const Tensor2& embedding);

/// Crafts and discretizes one perturbation per example against a frozen copy
/// of `params`. clean_prediction scores the unperturbed input and
/// adversarial_prediction the perturbed embeddings.
std::vector<AdversarialExample> attack_split(const ClassifierParams& params, const Split& split,
                                             const AttackConfig& config,
                                             const NeighborIndex& index);

/// Fraction of examples whose adversarial prediction differs from the label.
double attack_success_rate(std::span<const AdversarialExample> examples);

/// One JSON object per line of an `attack` output file.
nlohmann::ordered_json to_record(const AdversarialExample& example, const Vocabulary& vocab);
AdversarialExample from_record(const nlohmann::json& record);

enum class ReportFormat { kHtml, kAnsi, kJson };
/// Throws kUsage on anything but html/ansi/json.
ReportFormat parse_report_format(std::string_view name);

/// Per-sequence max-normalised intensities in [0, 1].
std::vector<double> intensities(std::span<const double> magnitudes);

std::string render(std::span<const AdversarialExample> examples, const Vocabulary& vocab,
                   ReportFormat format);

nlohmann::ordered_json report_json(std::span<const AdversarialExample> examples,
                                   const Vocabulary& vocab);

/// Checks a JSON report against the schema in docs/report-schema.md. Returns
/// one message per violation; empty means valid.
std::vector<std::string> validate_report_json(const nlohmann::json& report);

}  // namespace advtext
