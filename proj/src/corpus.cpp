#include "advtext/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "advtext/error.hpp"

namespace advtext {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

bool iends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && iequals(s.substr(s.size() - suffix.size()), suffix);
}

// Keeps letters, digits, apostrophes and non-ASCII bytes. U+2019 becomes '.
std::string strip_punctuation(std::string_view chunk) {
  std::string out;
  out.reserve(chunk.size());
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    const auto c = static_cast<unsigned char>(chunk[i]);
    if (c == 0xE2 && i + 2 < chunk.size() && static_cast<unsigned char>(chunk[i + 1]) == 0x80 &&
        static_cast<unsigned char>(chunk[i + 2]) == 0x99) {
      out.push_back('\'');
      i += 2;
      continue;
    }
    if (c >= 0x80 || c == '\'' || std::isalnum(c)) out.push_back(static_cast<char>(c));
  }
  return out;
}

void split_clitics(std::string_view word, std::vector<std::string>& out) {
  if (word.empty()) return;
  for (std::string_view clitic : kClitics) {
    if (iequals(word, clitic)) {
      out.emplace_back(word);
      return;
    }
  }
  for (std::string_view clitic : kClitics) {
    if (word.size() > clitic.size() && iends_with(word, clitic)) {
      split_clitics(word.substr(0, word.size() - clitic.size()), out);
      out.emplace_back(word.substr(word.size() - clitic.size()));
      return;
    }
  }
  std::string bare;
  for (char c : word) {
    if (c != '\'') bare.push_back(c);
  }
  if (!bare.empty()) out.push_back(std::move(bare));
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) split_clitics(strip_punctuation(text.substr(i, j - i)), out);
    i = j;
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i] == kEosToken) {
      throw Error(ErrorKind::kInvalidConfig, "vocabulary may not contain the eos marker");
    }
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i + 1)).second) {
      throw Error(ErrorKind::kInvalidConfig, "duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

bool Vocabulary::contains(std::string_view token) const { return id_of(token) != 0; }

TokenId Vocabulary::id_of(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? 0 : it->second;
}

const std::string& Vocabulary::token_of(TokenId id) const {
  if (id == eos_id()) return eos_;
  if (id == 0 || id > tokens_.size()) {
    throw Error(ErrorKind::kInvalidId, "id " + std::to_string(id) + " not in vocabulary of size " +
                                           std::to_string(tokens_.size()));
  }
  return tokens_[id - 1];
}

std::string Vocabulary::to_json() const {
  nlohmann::json arr = tokens_;
  arr.push_back(kEosToken);
  return arr.dump();
}

Vocabulary Vocabulary::from_json(std::string_view json) {
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kInvalidConfig, std::string("vocabulary JSON: ") + e.what());
  }
  if (!arr.is_array() || arr.empty() || arr.back() != kEosToken) {
    throw Error(ErrorKind::kInvalidConfig, "vocabulary JSON must be an array ending in <eos>");
  }
  std::vector<std::string> tokens;
  tokens.reserve(arr.size() - 1);
  for (std::size_t i = 0; i + 1 < arr.size(); ++i) tokens.push_back(arr[i].get<std::string>());
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << to_json() << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

Vocabulary build_vocab(std::span<const std::vector<std::string>> streams, std::size_t min_freq) {
  std::map<std::string, std::size_t> freq;
  for (const auto& s : streams) {
    for (const auto& t : s) ++freq[t];
  }
  if (freq.empty()) throw Error(ErrorKind::kEmptyInput, "no tokens to build a vocabulary from");
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : freq) {
    if (n >= min_freq) kept.emplace_back(tok, n);
  }
  if (kept.empty()) {
    throw Error(ErrorKind::kEmptyVocabulary,
                "no token reaches frequency " + std::to_string(min_freq));
  }
  // map iteration is already lexicographic; stable sort keeps that within ties
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(std::move(tok));
  return Vocabulary(std::move(tokens));
}

EncodeResult encode(const Vocabulary& vocab, std::span<const std::string> tokens) {
  EncodeResult r;
  r.ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    const TokenId id = vocab.id_of(t);
    if (id == 0) {
      ++r.dropped;
    } else {
      r.ids.push_back(id);
    }
  }
  return r;
}

std::vector<std::string> decode(const Vocabulary& vocab, std::span<const TokenId> ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(vocab.token_of(id));
  return out;
}

std::vector<RawExample> read_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::vector<RawExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const std::string label = line.substr(0, tab);
    if (tab == std::string::npos || (label != "0" && label != "1")) {
      throw Error(ErrorKind::kInvalidConfig,
                  path.string() + ":" + std::to_string(lineno) + ": expected '<0|1>\\t<text>'");
    }
    out.push_back({label == "1" ? 1 : 0, line.substr(tab + 1)});
  }
  return out;
}

void write_tsv(const std::filesystem::path& path, std::span<const RawExample> examples) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& e : examples) out << e.label << '\t' << e.text << '\n';
}

std::vector<std::vector<std::string>> tokenize_all(std::span<const RawExample> raw) {
  std::vector<std::vector<std::string>> out;
  out.reserve(raw.size());
  for (const auto& e : raw) out.push_back(tokenize(e.text));
  return out;
}

EncodedSplit encode_split(const Vocabulary& vocab, std::span<const RawExample> raw) {
  EncodedSplit out;
  for (const auto& e : raw) {
    const auto toks = tokenize(e.text);
    EncodeResult r = encode(vocab, toks);
    out.dropped_tokens += r.dropped;
    if (r.ids.empty()) {
      ++out.dropped_examples;
      continue;
    }
    out.examples.push_back({std::move(r.ids), e.label});
  }
  return out;
}

CorpusStats corpus_stats(const Split& split) {
  if (split.empty()) throw Error(ErrorKind::kEmptySplit, "corpus_stats of an empty split");
  CorpusStats s;
  s.num_examples = split.size();
  s.min_length = split.front().ids.size();
  s.max_length = s.min_length;
  std::size_t total = 0;
  for (const auto& e : split) {
    s.min_length = std::min(s.min_length, e.ids.size());
    s.max_length = std::max(s.max_length, e.ids.size());
    total += e.ids.size();
  }
  s.avg_length = static_cast<double>(total) / static_cast<double>(split.size());
  return s;
}

std::string format_stats_table(std::span<const std::pair<std::string, CorpusStats>> columns) {
  constexpr int kLabelWidth = 22;
  constexpr int kColWidth = 12;
  std::ostringstream os;
  os << std::left << std::setw(kLabelWidth) << "" << std::right;
  for (const auto& [name, st] : columns) os << std::setw(kColWidth) << name;
  os << '\n';
  const auto row = [&](const char* label, auto&& cell) {
    os << std::left << std::setw(kLabelWidth) << label << std::right;
    for (const auto& [name, st] : columns) os << std::setw(kColWidth) << cell(st);
    os << '\n';
  };
  row("Num. examples", [](const CorpusStats& s) { return std::to_string(s.num_examples); });
  row("Min. sequence length", [](const CorpusStats& s) { return std::to_string(s.min_length); });
  row("Max. sequence length", [](const CorpusStats& s) { return std::to_string(s.max_length); });
  row("Avg. sequence length", [](const CorpusStats& s) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(2) << s.avg_length;
    return c.str();
  });
  return os.str();
}

std::pair<Split, Split> split_holdout(const Split& split, double holdout_fraction,
                                      std::uint64_t seed) {
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) {
    throw Error(ErrorKind::kInvalidConfig, "holdout fraction must be in [0, 1)");
  }
  std::vector<std::size_t> order(split.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_hold = static_cast<std::size_t>(
      std::llround(holdout_fraction * static_cast<double>(split.size())));
  Split rest, hold;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_hold ? hold : rest).push_back(split[order[i]]);
  }
  return {std::move(rest), std::move(hold)};
}

std::vector<std::vector<TokenId>> sequences_of(const Split& split) {
  std::vector<std::vector<TokenId>> out;
  out.reserve(split.size());
  for (const auto& e : split) out.push_back(e.ids);
  return out;
}

}  // namespace advtext
