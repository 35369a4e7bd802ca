#include "advtext/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "advtext/error.hpp"

namespace advtext {
namespace {

bool is_zero(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

TokenId nearest_word(const Tensor2& embedding, std::span<const double> point) {
  const std::size_t words = embedding.rows() - 1;
  TokenId best = 1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < words; ++j) {
    const auto v = embedding.row(j);
    double s = 0.0;
    for (std::size_t c = 0; c < v.size(); ++c) {
      const double diff = v[c] - point[c];
      s += diff * diff;
    }
    if (s < best_d) {
      best_d = s;
      best = static_cast<TokenId>(j + 1);
    }
  }
  return best;
}

std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string cell_text(const Vocabulary& vocab, TokenId discretized, TokenId nearest) {
  return vocab.token_of(discretized) + " (" + vocab.token_of(nearest) + ")";
}

std::string original_text(const Vocabulary& vocab, std::span<const TokenId> ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s.push_back(' ');
    s += vocab.token_of(ids[i]);
  }
  return s;
}

std::string render_html(std::span<const AdversarialExample> examples, const Vocabulary& vocab) {
  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Adversarial sequences"
        "</title></head>\n<body style=\"font-family:sans-serif\">\n";
  for (std::size_t n = 0; n < examples.size(); ++n) {
    const auto& ex = examples[n];
    const auto inten = intensities(ex.magnitudes);
    os << "<div style=\"margin-bottom:1.5em\">\n<div style=\"font-size:small;color:#555\">#" << n
       << " " << to_string(ex.method) << " label=" << ex.label << "</div>\n<div>";
    for (std::size_t t = 0; t < ex.original.size(); ++t) {
      os << "<span style=\"display:inline-block;padding:2px 4px;margin:1px;background:rgba(220,40,40,"
         << std::fixed << std::setprecision(3) << inten[t] << ")\">"
         << html_escape(cell_text(vocab, ex.tokens.discretized[t], ex.tokens.nearest[t]))
         << "</span>";
    }
    os << "</div>\n<div style=\"color:#333;margin-top:4px\">"
       << html_escape(original_text(vocab, ex.original)) << "</div>\n</div>\n";
  }
  os << "</body></html>\n";
  return os.str();
}

std::string render_ansi(std::span<const AdversarialExample> examples, const Vocabulary& vocab) {
  std::ostringstream os;
  for (std::size_t n = 0; n < examples.size(); ++n) {
    const auto& ex = examples[n];
    const auto inten = intensities(ex.magnitudes);
    os << "#" << n << " " << to_string(ex.method) << " label=" << ex.label << "\n";
    for (std::size_t t = 0; t < ex.original.size(); ++t) {
      const int fade = static_cast<int>(std::lround(255.0 * (1.0 - inten[t])));
      os << "\x1b[30;48;2;255;" << fade << ';' << fade << 'm'
         << cell_text(vocab, ex.tokens.discretized[t], ex.tokens.nearest[t]) << "\x1b[0m ";
    }
    os << "\n" << original_text(vocab, ex.original) << "\n\n";
  }
  return os.str();
}

}  // namespace

Discretization discretize(const PerturbationSet& perturbation, std::span<const TokenId> ids,
                          const NeighborIndex& index, const Tensor2& embedding) {
  if (index.fingerprint() != embedding_fingerprint(embedding)) {
    throw Error(ErrorKind::kStaleIndex, "neighbour index was built from a different embedding");
  }
  if (perturbation.steps() != ids.size()) {
    throw Error(ErrorKind::kShape, "perturbation and sequence lengths differ");
  }
  Discretization out;
  out.discretized.reserve(ids.size());
  out.nearest.reserve(ids.size());
  std::vector<double> point(embedding.cols());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const auto d = perturbation.vectors.row(t);
    const auto v = embedding.row(embedding_row(ids[t]));
    if (is_zero(d)) {
      out.discretized.push_back(ids[t]);
      out.nearest.push_back(ids[t]);
      continue;
    }
    TokenId target = ids[t];
    const auto& entry = index.entry(ids[t]);
    if (const auto& chosen = perturbation.chosen_neighbor[t]) {
      const auto it = std::find(entry.neighbors.begin(), entry.neighbors.end(), *chosen);
      if (it == entry.neighbors.end()) {
        throw Error(ErrorKind::kStaleIndex, "chosen neighbour is not in the current index");
      }
      const auto slot = static_cast<std::size_t>(it - entry.neighbors.begin());
      if (dot(d, entry.directions.row(slot)) > 0.0) target = *chosen;
    } else if (const auto best = best_direction(index, ids[t], d); best && best->dot > 0.0) {
      target = entry.neighbors[best->slot];
    }
    out.discretized.push_back(target);
    for (std::size_t c = 0; c < point.size(); ++c) point[c] = v[c] + d[c];
    out.nearest.push_back(nearest_word(embedding, point));
  }
  return out;
}

AdversarialExample make_example(std::span<const TokenId> ids, int label, AttackMethod method,
                                PerturbationSet perturbation, const NeighborIndex& index,
                                const Tensor2& embedding) {
  AdversarialExample ex;
  ex.original.assign(ids.begin(), ids.end());
  ex.label = label;
  ex.method = method;
  ex.tokens = discretize(perturbation, ids, index, embedding);
  ex.magnitudes.resize(ids.size());
  for (std::size_t t = 0; t < ids.size(); ++t) ex.magnitudes[t] = perturbation.magnitude(t);
  ex.perturbation = std::move(perturbation);
  ex.index_fingerprint = index.fingerprint();
  ex.index_k = index.k();
  return ex;
}

std::vector<AdversarialExample> attack_split(const ClassifierParams& params, const Split& split,
                                             const AttackConfig& config,
                                             const NeighborIndex& index) {
  config.validate();
  const FrozenParams frozen(params);
  std::vector<AdversarialExample> out;
  out.reserve(split.size());
  for (const auto& seq : split) {
    const Tensor2 x = embed(params.embedding, seq.ids);
    auto d = craft_perturbation(config, frozen, x, seq.ids, &index, seq.label);
    const Tensor2 moved = apply_perturbation(x, d);
    auto ex = make_example(seq.ids, seq.label, config.method, std::move(d), index, params.embedding);
    ex.clean_prediction = forward(params, x).predicted();
    ex.adversarial_prediction = forward(params, moved).predicted();
    out.push_back(std::move(ex));
  }
  return out;
}

double attack_success_rate(std::span<const AdversarialExample> examples) {
  if (examples.empty()) throw Error(ErrorKind::kEmptyInput, "no adversarial examples");
  std::size_t hits = 0;
  for (const auto& ex : examples) {
    if (ex.adversarial_prediction && *ex.adversarial_prediction != ex.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

nlohmann::ordered_json to_record(const AdversarialExample& ex, const Vocabulary& vocab) {
  nlohmann::ordered_json j;
  j["method"] = std::string(to_string(ex.method));
  j["label"] = ex.label;
  if (ex.clean_prediction) j["clean_prediction"] = *ex.clean_prediction;
  if (ex.adversarial_prediction) j["adversarial_prediction"] = *ex.adversarial_prediction;
  j["original_ids"] = ex.original;
  j["original_tokens"] = decode(vocab, ex.original);
  j["raw_norms"] = ex.perturbation.raw_norms;
  j["magnitudes"] = ex.magnitudes;
  j["kept"] = ex.perturbation.kept;
  nlohmann::ordered_json chosen = nlohmann::ordered_json::array();
  for (const auto& c : ex.perturbation.chosen_neighbor) {
    chosen.push_back(c ? nlohmann::ordered_json(*c) : nlohmann::ordered_json(nullptr));
  }
  j["chosen_neighbors"] = std::move(chosen);
  j["discretized_ids"] = ex.tokens.discretized;
  j["discretized_tokens"] = decode(vocab, ex.tokens.discretized);
  j["nearest_ids"] = ex.tokens.nearest;
  j["nearest_tokens"] = decode(vocab, ex.tokens.nearest);
  j["index_k"] = ex.index_k;
  j["index_fingerprint"] = ex.index_fingerprint;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < ex.perturbation.steps(); ++t) {
    const auto r = ex.perturbation.vectors.row(t);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j["perturbation"] = std::move(rows);
  return j;
}

AdversarialExample from_record(const nlohmann::json& j) {
  try {
    AdversarialExample ex;
    ex.method = parse_attack_method(j.at("method").get<std::string>());
    ex.label = j.at("label").get<int>();
    if (j.contains("clean_prediction")) ex.clean_prediction = j["clean_prediction"].get<int>();
    if (j.contains("adversarial_prediction")) {
      ex.adversarial_prediction = j["adversarial_prediction"].get<int>();
    }
    ex.original = j.at("original_ids").get<std::vector<TokenId>>();
    const auto& rows = j.at("perturbation");
    const std::size_t steps = ex.original.size();
    if (rows.size() != steps) throw Error(ErrorKind::kShape, "perturbation rows != sequence length");
    const std::size_t dim = steps ? rows[0].size() : 0;
    ex.perturbation = PerturbationSet::zeros(steps, dim);
    for (std::size_t t = 0; t < steps; ++t) {
      const auto row = rows[t].get<std::vector<double>>();
      if (row.size() != dim) throw Error(ErrorKind::kShape, "ragged perturbation rows");
      std::copy(row.begin(), row.end(), ex.perturbation.vectors.row(t).begin());
    }
    ex.perturbation.raw_norms = j.at("raw_norms").get<std::vector<double>>();
    ex.perturbation.kept = j.at("kept").get<std::vector<bool>>();
    const auto& chosen = j.at("chosen_neighbors");
    for (std::size_t t = 0; t < steps && t < chosen.size(); ++t) {
      if (!chosen[t].is_null()) ex.perturbation.chosen_neighbor[t] = chosen[t].get<TokenId>();
    }
    ex.magnitudes = j.at("magnitudes").get<std::vector<double>>();
    ex.tokens.discretized = j.at("discretized_ids").get<std::vector<TokenId>>();
    ex.tokens.nearest = j.at("nearest_ids").get<std::vector<TokenId>>();
    ex.index_k = j.at("index_k").get<std::size_t>();
    ex.index_fingerprint = j.at("index_fingerprint").get<std::uint64_t>();
    return ex;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kInvalidConfig, std::string("malformed adversarial record: ") + e.what());
  }
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "html") return ReportFormat::kHtml;
  if (name == "ansi") return ReportFormat::kAnsi;
  if (name == "json") return ReportFormat::kJson;
  throw Error(ErrorKind::kUsage, "unsupported report format '" + std::string(name) + "'");
}

std::vector<double> intensities(std::span<const double> magnitudes) {
  const double mx = magnitudes.empty() ? 0.0 : *std::max_element(magnitudes.begin(), magnitudes.end());
  std::vector<double> out(magnitudes.size(), 0.0);
  if (mx <= 0.0) return out;
  for (std::size_t i = 0; i < magnitudes.size(); ++i) out[i] = magnitudes[i] / mx;
  return out;
}

nlohmann::ordered_json report_json(std::span<const AdversarialExample> examples,
                                   const Vocabulary& vocab) {
  nlohmann::ordered_json seqs = nlohmann::ordered_json::array();
  for (const auto& ex : examples) {
    const auto inten = intensities(ex.magnitudes);
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (std::size_t t = 0; t < ex.original.size(); ++t) {
      nlohmann::ordered_json c;
      c["original"] = vocab.token_of(ex.original[t]);
      c["discretized"] = vocab.token_of(ex.tokens.discretized[t]);
      c["nearest"] = vocab.token_of(ex.tokens.nearest[t]);
      c["magnitude"] = ex.magnitudes[t];
      c["intensity"] = inten[t];
      cells.push_back(std::move(c));
    }
    nlohmann::ordered_json s;
    s["method"] = std::string(to_string(ex.method));
    s["label"] = ex.label;
    s["cells"] = std::move(cells);
    s["original_text"] = original_text(vocab, ex.original);
    seqs.push_back(std::move(s));
  }
  nlohmann::ordered_json root;
  root["format"] = "advtext-report";
  root["version"] = 1;
  root["sequences"] = std::move(seqs);
  return root;
}

std::string render(std::span<const AdversarialExample> examples, const Vocabulary& vocab,
                   ReportFormat format) {
  for (const auto& ex : examples) {
    const std::size_t n = ex.original.size();
    if (ex.magnitudes.size() != n || ex.tokens.discretized.size() != n ||
        ex.tokens.nearest.size() != n) {
      throw Error(ErrorKind::kShape, "adversarial example arrays have different lengths");
    }
  }
  switch (format) {
    case ReportFormat::kHtml: return render_html(examples, vocab);
    case ReportFormat::kAnsi: return render_ansi(examples, vocab);
    case ReportFormat::kJson: return report_json(examples, vocab).dump(2) + "\n";
  }
  throw Error(ErrorKind::kUsage, "unsupported report format");
}

std::vector<std::string> validate_report_json(const nlohmann::json& r) {
  std::vector<std::string> errs;
  if (!r.is_object()) return {"root must be an object"};
  if (r.value("format", "") != "advtext-report") errs.push_back("format must be \"advtext-report\"");
  if (!r.contains("version") || !r["version"].is_number_integer() || r["version"] != 1) {
    errs.push_back("version must be the integer 1");
  }
  if (!r.contains("sequences") || !r["sequences"].is_array()) {
    errs.push_back("sequences must be an array");
    return errs;
  }
  for (std::size_t i = 0; i < r["sequences"].size(); ++i) {
    const auto& s = r["sequences"][i];
    const std::string at = "sequences[" + std::to_string(i) + "]";
    if (!s.is_object()) {
      errs.push_back(at + " must be an object");
      continue;
    }
    if (!s.contains("method") || !s["method"].is_string() ||
        (s["method"] != "advt" && s["method"] != "iadvt" && s["method"] != "spgd")) {
      errs.push_back(at + ".method must be one of advt, iadvt, spgd");
    }
    if (!s.contains("label") || !s["label"].is_number_integer() ||
        (s["label"] != 0 && s["label"] != 1)) {
      errs.push_back(at + ".label must be 0 or 1");
    }
    if (!s.contains("original_text") || !s["original_text"].is_string()) {
      errs.push_back(at + ".original_text must be a string");
    }
    if (!s.contains("cells") || !s["cells"].is_array() || s["cells"].empty()) {
      errs.push_back(at + ".cells must be a non-empty array");
      continue;
    }
    double max_intensity = 0.0;
    for (std::size_t t = 0; t < s["cells"].size(); ++t) {
      const auto& c = s["cells"][t];
      const std::string cat = at + ".cells[" + std::to_string(t) + "]";
      for (const char* key : {"original", "discretized", "nearest"}) {
        if (!c.contains(key) || !c[key].is_string()) errs.push_back(cat + "." + key + " must be a string");
      }
      if (!c.contains("magnitude") || !c["magnitude"].is_number() || c["magnitude"].get<double>() < 0.0) {
        errs.push_back(cat + ".magnitude must be a number >= 0");
      }
      if (!c.contains("intensity") || !c["intensity"].is_number() ||
          c["intensity"].get<double>() < 0.0 || c["intensity"].get<double>() > 1.0) {
        errs.push_back(cat + ".intensity must be a number in [0, 1]");
      } else {
        max_intensity = std::max(max_intensity, c["intensity"].get<double>());
      }
    }
    if (max_intensity != 0.0 && max_intensity != 1.0) {
      errs.push_back(at + ": the largest intensity must be 1 (or all 0)");
    }
  }
  return errs;
}

}  // namespace advtext
