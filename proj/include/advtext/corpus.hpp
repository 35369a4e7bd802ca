#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "advtext/nn.hpp"

namespace advtext {

/// Contractions split off as their own tokens.
inline constexpr std::string_view kClitics[] = {"n't", "'s", "'re", "'ve", "'ll", "'d", "'m"};
inline constexpr std::string_view kEosToken = "<eos>";

/// Whitespace split, punctuation removed except apostrophes that belong to a
/// clitic, clitics split into their own tokens, casing kept.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  Vocabulary() = default;
  /// `tokens` in id order (id 1 first); eos is appended implicitly.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }  // |V|, eos excluded
  TokenId eos_id() const { return static_cast<TokenId>(tokens_.size() + 1); }
  std::size_t embedding_rows() const { return tokens_.size() + 1; }

  bool contains(std::string_view token) const;
  /// 0 when absent.
  TokenId id_of(std::string_view token) const;
  /// Throws kInvalidId for 0 or anything past eos.
  const std::string& token_of(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// JSON array of tokens in id order, eos last.
  std::string to_json() const;
  static Vocabulary from_json(std::string_view json);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::string eos_ = std::string(kEosToken);
};

/// Keeps tokens with frequency >= min_freq (2 drops hapax legomena), ordered
/// by descending frequency then lexicographically.
Vocabulary build_vocab(std::span<const std::vector<std::string>> streams, std::size_t min_freq = 2);

struct EncodeResult {
  std::vector<TokenId> ids;
  std::size_t dropped = 0;  // out-of-vocabulary tokens
};

EncodeResult encode(const Vocabulary& vocab, std::span<const std::string> tokens);
std::vector<std::string> decode(const Vocabulary& vocab, std::span<const TokenId> ids);

struct RawExample {
  int label = 0;
  std::string text;
};

struct LabeledSequence {
  std::vector<TokenId> ids;
  int label = 0;
};

using Split = std::vector<LabeledSequence>;

/// Tab-separated `label<TAB>text`, one example per line.
std::vector<RawExample> read_tsv(const std::filesystem::path& path);
void write_tsv(const std::filesystem::path& path, std::span<const RawExample> examples);

struct EncodedSplit {
  Split examples;
  std::size_t dropped_tokens = 0;
  std::size_t dropped_examples = 0;  // empty after OOV removal
};

EncodedSplit encode_split(const Vocabulary& vocab, std::span<const RawExample> raw);

/// Token stream per example, for vocabulary building.
std::vector<std::vector<std::string>> tokenize_all(std::span<const RawExample> raw);

struct CorpusStats {
  std::size_t num_examples = 0;
  std::size_t min_length = 0;
  std::size_t max_length = 0;
  double avg_length = 0.0;
};

CorpusStats corpus_stats(const Split& split);

/// Aligned text table with one column per named split.
std::string format_stats_table(std::span<const std::pair<std::string, CorpusStats>> columns);

/// Deterministic shuffle, then (rest, holdout) with round(fraction * n)
/// examples held out.
std::pair<Split, Split> split_holdout(const Split& split, double holdout_fraction,
                                      std::uint64_t seed);

std::vector<std::vector<TokenId>> sequences_of(const Split& split);

}  // namespace advtext
