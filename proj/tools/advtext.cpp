#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <advtext/attacks.hpp>
#include <advtext/checkpoint.hpp>
#include <advtext/corpus.hpp>
#include <advtext/error.hpp>
#include <advtext/lm.hpp>
#include <advtext/neighbor_index.hpp>
#include <advtext/report.hpp>
#include <advtext/toy_corpus.hpp>
#include <advtext/trainer.hpp>

#include "train_config.hpp"

namespace fs = std::filesystem;
using namespace advtext;
using json = nlohmann::ordered_json;

namespace {

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  out << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

/// A directory resolves to its train.tsv.
fs::path resolve_input(const fs::path& input) {
  return fs::is_directory(input) ? input / "train.tsv" : input;
}

Split load_split(const Vocabulary& vocab, const fs::path& tsv) {
  const auto raw = read_tsv(tsv);
  auto enc = encode_split(vocab, raw);
  if (enc.examples.empty()) throw Error(ErrorKind::kEmptySplit, tsv.string() + " has no usable examples");
  return std::move(enc.examples);
}

std::vector<std::vector<TokenId>> sample_sequences(std::vector<std::vector<TokenId>> seqs,
                                                   std::size_t sample, std::uint64_t seed) {
  if (sample == 0 || sample >= seqs.size()) return seqs;
  std::mt19937_64 rng(seed);
  std::shuffle(seqs.begin(), seqs.end(), rng);
  seqs.resize(sample);
  return seqs;
}

// ---------------------------------------------------------------------------

struct ToyArgs {
  std::string out = "data/toy";
  std::uint64_t seed = 1;
  std::size_t train = 2000;
  std::size_t test = 500;
};

int run_make_toy(const ToyArgs& a) {
  const auto corpus = generate_toy_corpus(a.seed, a.train, a.test);
  fs::create_directories(a.out);
  write_tsv(fs::path(a.out) / "train.tsv", corpus.train);
  write_tsv(fs::path(a.out) / "test.tsv", corpus.test);
  std::cout << "wrote " << corpus.train.size() << " train and " << corpus.test.size()
            << " test examples to " << a.out << "\n";
  return 0;
}

struct VocabArgs {
  std::string input;
  std::size_t min_freq = 2;
  std::string out = "vocab.json";
};

int run_build_vocab(const VocabArgs& a) {
  const fs::path train = resolve_input(a.input);
  const auto raw = read_tsv(train);
  const auto toks = tokenize_all(raw);
  const auto vocab = build_vocab(toks, a.min_freq);
  vocab.save(a.out);

  std::vector<std::pair<std::string, CorpusStats>> cols;
  cols.emplace_back("Train", corpus_stats(encode_split(vocab, raw).examples));
  const fs::path test = train.parent_path() / "test.tsv";
  if (fs::is_directory(a.input) && fs::exists(test)) {
    cols.emplace_back("Test", corpus_stats(encode_split(vocab, read_tsv(test)).examples));
  }
  std::cout << "vocabulary: " << vocab.size() << " words (+ eos) -> " << a.out << "\n"
            << format_stats_table(cols);
  return 0;
}

struct StatsArgs {
  std::string vocab;
  std::vector<std::string> inputs;
};

int run_stats(const StatsArgs& a) {
  const auto vocab = Vocabulary::load(a.vocab);
  std::vector<std::pair<std::string, CorpusStats>> cols;
  for (const auto& in : a.inputs) {
    cols.emplace_back(fs::path(in).stem().string(), corpus_stats(load_split(vocab, in)));
  }
  std::cout << format_stats_table(cols);
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string mode;
  std::string config;
  std::size_t repeats = 1;
  std::optional<std::uint64_t> seed;
  std::string json_out;
  std::string checkpoint;
};

json config_json(const cli::RunConfig& rc, cli::TrainMode mode) {
  json j;
  j["mode"] = cli::to_string(mode);
  j["embed_dim"] = rc.dims.embed_dim;
  j["hidden_dim"] = rc.dims.hidden_dim;
  j["head_dim"] = rc.dims.head_dim;
  j["epochs"] = rc.train.epochs;
  j["batch_size"] = rc.train.batch_size;
  j["lambda"] = rc.train.lambda;
  j["clip_norm"] = rc.train.clip_norm;
  j["patience"] = rc.train.patience;
  j["learning_rate"] = rc.train.adam.learning_rate;
  j["lr_decay"] = rc.train.adam.lr_decay;
  j["dev_fraction"] = rc.dev_fraction;
  if (rc.train.attack) {
    const auto& at = *rc.train.attack;
    j["attack"] = {{"method", std::string(to_string(at.method))}, {"epsilon", at.epsilon},
                   {"k", at.k_neighbors}, {"sigma", at.sigma}, {"m", at.m_steps},
                   {"refresh_interval", at.refresh_interval}, {"clamp_away_moves", at.clamp_away_moves}};
  }
  return j;
}

int run_train(const TrainArgs& a) {
  const auto mode = cli::parse_train_mode(a.mode);
  auto rc = cli::load_run_config(a.config, mode);
  if (a.seed) rc.train.seed = *a.seed;
  if (!a.checkpoint.empty()) rc.checkpoint = a.checkpoint;
  if (a.repeats == 0) throw Error(ErrorKind::kUsage, "--repeats must be positive");

  const auto train_raw = read_tsv(rc.train_tsv);
  const Vocabulary vocab = rc.vocab ? Vocabulary::load(*rc.vocab)
                                    : build_vocab(tokenize_all(train_raw), rc.min_freq);
  const Split all_train = encode_split(vocab, train_raw).examples;
  const Split test = load_split(vocab, rc.test_tsv);
  // the dev split is fixed by the config seed so repeats share it
  const auto [train_split, dev_split] = split_holdout(all_train, rc.dev_fraction, rc.train.seed);

  rc.dims.vocab_rows = vocab.embedding_rows();
  std::optional<LMParams> lm;
  if (mode == cli::TrainMode::kPretrained || (rc.lm && rc.train.adversarial())) lm = load_lm(*rc.lm);

  json runs = json::array();
  std::vector<double> accs;
  std::ostringstream table;
  table << std::left << std::setw(12) << "mode" << std::right << std::setw(8) << "seed"
        << std::setw(8) << "epoch" << std::setw(10) << "dev acc" << std::setw(10) << "test acc"
        << std::setw(10) << "test err" << std::setw(10) << "diverged" << "\n";
  for (std::size_t r = 0; r < a.repeats; ++r) {
    TrainConfig cfg = rc.train;
    cfg.seed = rc.train.seed + r;
    auto params = init_params(rc.dims, cfg.init, cfg.seed);
    if (lm) pretrain_init(params, *lm);
    const auto rep = train(params, train_split, dev_split, test, cfg);
    accs.push_back(rep.test.accuracy);

    json run;
    run["seed"] = cfg.seed;
    run["epoch_train_loss"] = rep.epoch_train_loss;
    run["epoch_dev_accuracy"] = rep.epoch_dev_accuracy;
    run["best_epoch"] = rep.best_epoch;
    run["best_dev_accuracy"] = rep.best_dev_accuracy;
    run["test_accuracy"] = rep.test.accuracy;
    run["test_error_rate"] = rep.test.error_rate;
    run["diverged"] = rep.diverged;
    if (rc.checkpoint) {
      fs::path ck = *rc.checkpoint;
      if (a.repeats > 1) {
        ck.replace_filename(ck.stem().string() + ".seed" + std::to_string(cfg.seed) +
                            ck.extension().string());
      }
      save_classifier(ck, params, cfg.seed);
      run["checkpoint"] = ck.string();
    }
    runs.push_back(std::move(run));

    table << std::left << std::setw(12) << cli::to_string(mode) << std::right << std::setw(8)
          << cfg.seed << std::setw(8) << rep.best_epoch << std::setw(10)
          << fixed(rep.best_dev_accuracy, 2) << std::setw(10) << fixed(rep.test.accuracy, 2)
          << std::setw(10) << fixed(rep.test.error_rate, 2) << std::setw(10)
          << (rep.diverged ? "yes" : "no") << "\n";
  }
  const double mean = std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
  double var = 0.0;
  for (double x : accs) var += (x - mean) * (x - mean);
  const double sd = accs.size() > 1 ? std::sqrt(var / static_cast<double>(accs.size() - 1)) : 0.0;

  json j;
  j["config"] = config_json(rc, mode);
  j["vocab_size"] = vocab.size();
  j["splits"] = {{"train", train_split.size()}, {"dev", dev_split.size()}, {"test", test.size()}};
  j["runs"] = std::move(runs);
  j["mean_test_accuracy"] = mean;
  j["std_test_accuracy"] = sd;
  if (!a.json_out.empty()) write_text(a.json_out, dump(j));
  std::cout << table.str() << "mean test accuracy " << fixed(mean, 2) << " +/- " << fixed(sd, 2)
            << " over " << accs.size() << " run(s)\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct LmArgs {
  std::string corpus;
  std::string vocab;
  std::size_t tbptt = 35;
  double clip = 5.0;
  std::string out = "lm.ckpt";
  std::size_t embed = 16;
  std::size_t hidden = 32;
  std::size_t epochs = 10;
  std::size_t patience = 3;
  double lr = 1e-3;
  double validation = 0.1;
  std::uint64_t seed = 1;
  std::string json_out;
};

int run_train_lm(const LmArgs& a) {
  const auto vocab = Vocabulary::load(a.vocab);
  const Split all = load_split(vocab, resolve_input(a.corpus));
  const auto [train_split, val_split] = split_holdout(all, a.validation, a.seed);
  const auto stream = concat_stream(sequences_of(train_split), vocab.eos_id());
  LmTrainConfig cfg;
  cfg.tbptt = a.tbptt;
  cfg.clip_norm = a.clip;
  cfg.epochs = a.epochs;
  cfg.patience = a.patience;
  cfg.seed = a.seed;
  cfg.adam.learning_rate = a.lr;
  const auto val = sequences_of(val_split);
  const auto r = lm_train({vocab.embedding_rows(), a.embed, a.hidden}, stream, val, cfg);
  save_lm(a.out, r.params, a.seed);

  json j;
  j["checkpoint"] = a.out;
  j["stream_tokens"] = stream.size();
  j["train_perplexity"] = r.train_perplexity;
  j["validation_perplexity"] = r.validation_perplexity;
  j["final_learning_rate"] = r.final_learning_rate;
  if (!a.json_out.empty()) write_text(a.json_out, dump(j));
  std::cout << std::left << std::setw(8) << "epoch" << std::right << std::setw(14) << "train ppl"
            << std::setw(14) << "valid ppl" << "\n";
  for (std::size_t e = 0; e < r.train_perplexity.size(); ++e) {
    std::cout << std::left << std::setw(8) << e + 1 << std::right << std::setw(14)
              << fixed(r.train_perplexity[e], 2) << std::setw(14)
              << (e < r.validation_perplexity.size() ? fixed(r.validation_perplexity[e], 2) : "-")
              << "\n";
  }
  return 0;
}

struct PplArgs {
  std::string lm;
  std::string vocab;
  std::string input;
  std::size_t sample = 0;
  std::uint64_t seed = 1;
  std::string json_out;
};

std::vector<AdversarialExample> read_adv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path);
  std::vector<AdversarialExample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(from_record(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kInvalidConfig, path + ": " + e.what());
    }
  }
  if (out.empty()) throw Error(ErrorKind::kEmptyInput, path + " has no records");
  return out;
}

int run_perplexity(const PplArgs& a) {
  const auto lm = load_lm(a.lm);
  json rows = json::array();
  std::ostringstream table;
  table << std::left << std::setw(10) << "attack" << std::right << std::setw(10) << "seqs"
        << std::setw(14) << "original" << std::setw(14) << "adversarial" << std::setw(10)
        << "gap" << "\n";
  const auto add_row = [&](const std::string& name, const PerplexityReport& r) {
    rows.push_back({{"attack", name}, {"sequences", r.sequences}, {"original", r.original},
                    {"adversarial", r.adversarial}, {"gap", r.gap}});
    table << std::left << std::setw(10) << name << std::right << std::setw(10) << r.sequences
          << std::setw(14) << fixed(r.original, 2) << std::setw(14) << fixed(r.adversarial, 2)
          << std::setw(10) << fixed(r.gap, 2) << "\n";
  };

  if (fs::path(a.input).extension() == ".jsonl") {
    auto adv = read_adv(a.input);
    if (a.sample > 0 && a.sample < adv.size()) {
      std::mt19937_64 rng(a.seed);
      std::shuffle(adv.begin(), adv.end(), rng);
      adv.resize(a.sample);
    }
    std::vector<std::vector<TokenId>> orig, pert;
    for (const auto& ex : adv) {
      orig.push_back(ex.original);
      pert.push_back(ex.tokens.discretized);
    }
    add_row("none", perplexity_gap(lm, orig, orig));
    add_row(std::string(to_string(adv.front().method)), perplexity_gap(lm, orig, pert));
  } else {
    const auto vocab = Vocabulary::load(a.vocab);
    const auto seqs = sample_sequences(sequences_of(load_split(vocab, a.input)), a.sample, a.seed);
    add_row("none", perplexity_gap(lm, seqs, seqs));
  }
  json j;
  j["lm"] = a.lm;
  j["input"] = a.input;
  j["rows"] = std::move(rows);
  if (!a.json_out.empty()) write_text(a.json_out, dump(j));
  std::cout << table.str();
  return 0;
}

// ---------------------------------------------------------------------------

struct AttackArgs {
  std::string method = "spgd";
  std::optional<double> epsilon;
  std::optional<std::size_t> k;
  std::optional<double> sigma;
  std::optional<std::size_t> m;
  bool clamp_away = false;
  std::string model;
  std::string vocab;
  std::string input;
  std::string out = "adv.jsonl";
  std::size_t limit = 0;
};

int run_attack(const AttackArgs& a) {
  AttackConfig cfg = AttackConfig::defaults(parse_attack_method(a.method));
  if (a.epsilon) cfg.epsilon = *a.epsilon;
  if (a.k) cfg.k_neighbors = *a.k;
  if (a.sigma) cfg.sigma = *a.sigma;
  if (a.m) cfg.m_steps = *a.m;
  cfg.clamp_away_moves = a.clamp_away;
  cfg.validate();

  const auto params = load_classifier(a.model);
  const auto vocab = Vocabulary::load(a.vocab);
  if (vocab.embedding_rows() != params.embedding.rows()) {
    throw Error(ErrorKind::kShape, "vocabulary does not match the model's embedding");
  }
  Split split = load_split(vocab, a.input);
  if (a.limit > 0 && a.limit < split.size()) split.resize(a.limit);
  const auto index = build_index(params.embedding, cfg.k_neighbors);
  const auto adv = attack_split(params, split, cfg, index);

  std::string out;
  std::size_t changed = 0, tokens = 0;
  for (const auto& ex : adv) {
    out += to_record(ex, vocab).dump() + "\n";
    for (std::size_t t = 0; t < ex.original.size(); ++t) {
      changed += ex.tokens.discretized[t] != ex.original[t];
    }
    tokens += ex.original.size();
  }
  write_text(a.out, out);
  std::cout << "method " << to_string(cfg.method) << ", " << adv.size() << " sequences, success rate "
            << fixed(100.0 * attack_success_rate(adv), 2) << "%, " << changed << "/" << tokens
            << " tokens discretized to a neighbour -> " << a.out << "\n";
  return 0;
}

struct ReportArgs {
  std::string adv;
  std::string model;
  std::string vocab;
  std::string format = "html";
  std::string out = "report.html";
};

int run_report(const ReportArgs& a) {
  const auto format = parse_report_format(a.format);
  const auto params = load_classifier(a.model);
  const auto vocab = Vocabulary::load(a.vocab);
  const auto adv = read_adv(a.adv);
  const auto fp = embedding_fingerprint(params.embedding);
  for (const auto& ex : adv) {
    if (ex.index_fingerprint != fp) {
      throw Error(ErrorKind::kStaleIndex, a.adv + " was not produced with " + a.model);
    }
  }
  write_text(a.out, render(adv, vocab, format));
  return 0;
}

struct NeighborArgs {
  std::string model;
  std::string vocab;
  std::vector<std::string> words;
  std::size_t k = 15;
  std::string out = "-";
};

int run_dump_neighbors(const NeighborArgs& a) {
  const auto params = load_classifier(a.model);
  const auto vocab = Vocabulary::load(a.vocab);
  const auto index = build_index(params.embedding, a.k);
  std::vector<TokenId> ids;
  if (a.words.empty()) {
    for (TokenId w = 1; w <= vocab.size(); ++w) ids.push_back(w);
  }
  for (const auto& w : a.words) {
    const TokenId id = vocab.id_of(w);
    if (id == 0) throw Error(ErrorKind::kInvalidId, "'" + w + "' is not in the vocabulary");
    ids.push_back(id);
  }
  json j = json::object();
  for (TokenId id : ids) {
    const auto& e = index.entry(id);
    json list = json::array();
    for (std::size_t s = 0; s < e.neighbors.size(); ++s) {
      list.push_back({{"token", vocab.token_of(e.neighbors[s])}, {"cosine", e.cosines[s]}});
    }
    j[vocab.token_of(id)] = std::move(list);
  }
  write_text(a.out, dump(j));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial training and attacks for LSTM text classifiers"};
  app.require_subcommand(1);
  int status = 0;

  ToyArgs toy;
  auto* c_toy = app.add_subcommand("make-toy-corpus", "Write the synthetic sentiment corpus");
  c_toy->add_option("--out", toy.out, "Output directory")->capture_default_str();
  c_toy->add_option("--seed", toy.seed)->capture_default_str();
  c_toy->add_option("--train", toy.train, "Training examples")->capture_default_str();
  c_toy->add_option("--test", toy.test, "Test examples")->capture_default_str();
  c_toy->callback([&] { status = run_make_toy(toy); });

  VocabArgs va;
  auto* c_vocab = app.add_subcommand("build-vocab", "Build vocabulary and print corpus statistics");
  c_vocab->add_option("--input", va.input, "Directory with train.tsv (and test.tsv) or a tsv file")->required();
  c_vocab->add_option("--min-freq", va.min_freq)->capture_default_str();
  c_vocab->add_option("--out", va.out)->capture_default_str();
  c_vocab->callback([&] { status = run_build_vocab(va); });

  StatsArgs sa;
  auto* c_stats = app.add_subcommand("stats", "Print statistics of encoded tsv files");
  c_stats->add_option("--vocab", sa.vocab)->required();
  c_stats->add_option("--input", sa.inputs)->required();
  c_stats->callback([&] { status = run_stats(sa); });

  TrainArgs ta;
  auto* c_train = app.add_subcommand("train", "Train a classifier");
  c_train->add_option("--mode", ta.mode)->required()->check(
      CLI::IsMember({"baseline", "pretrained", "advt", "iadvt", "spgd"}));
  c_train->add_option("--config", ta.config)->required()->check(CLI::ExistingFile);
  c_train->add_option("--repeats", ta.repeats, "Runs with consecutive seeds")->capture_default_str();
  c_train->add_option("--seed", ta.seed, "Overrides [train] seed");
  c_train->add_option("--json", ta.json_out, "Write the training report as JSON ('-' for stdout)");
  c_train->add_option("--checkpoint", ta.checkpoint, "Overrides [output] checkpoint");
  c_train->callback([&] { status = run_train(ta); });

  LmArgs la;
  auto* c_lm = app.add_subcommand("train-lm", "Train an LSTM language model");
  c_lm->add_option("--corpus", la.corpus, "tsv file, labels ignored")->required();
  c_lm->add_option("--vocab", la.vocab)->required();
  c_lm->add_option("--tbptt", la.tbptt)->capture_default_str();
  c_lm->add_option("--clip", la.clip)->capture_default_str();
  c_lm->add_option("--out", la.out)->capture_default_str();
  c_lm->add_option("--embed-dim", la.embed)->capture_default_str();
  c_lm->add_option("--hidden-dim", la.hidden)->capture_default_str();
  c_lm->add_option("--epochs", la.epochs)->capture_default_str();
  c_lm->add_option("--patience", la.patience)->capture_default_str();
  c_lm->add_option("--lr", la.lr)->capture_default_str();
  c_lm->add_option("--validation", la.validation, "Held-out fraction")->capture_default_str();
  c_lm->add_option("--seed", la.seed)->capture_default_str();
  c_lm->add_option("--json", la.json_out);
  c_lm->callback([&] { status = run_train_lm(la); });

  PplArgs pa;
  auto* c_ppl = app.add_subcommand("perplexity", "Perplexity of a tsv file or gap of an attack output");
  c_ppl->add_option("--lm", pa.lm)->required();
  c_ppl->add_option("--input", pa.input, "tsv file or .jsonl from attack")->required();
  c_ppl->add_option("--vocab", pa.vocab, "Needed for tsv input");
  c_ppl->add_option("--sample", pa.sample, "Random sample size, 0 for all")->capture_default_str();
  c_ppl->add_option("--seed", pa.seed)->capture_default_str();
  c_ppl->add_option("--json", pa.json_out);
  c_ppl->callback([&] {
    if (fs::path(pa.input).extension() != ".jsonl" && pa.vocab.empty()) {
      throw CLI::ValidationError("--vocab", "required for tsv input");
    }
    status = run_perplexity(pa);
  });

  AttackArgs aa;
  auto* c_att = app.add_subcommand("attack", "Craft adversarial perturbations");
  c_att->add_option("--method", aa.method)->check(CLI::IsMember({"advt", "iadvt", "spgd"}))->capture_default_str();
  c_att->add_option("--epsilon", aa.epsilon);
  c_att->add_option("--k", aa.k);
  c_att->add_option("--sigma", aa.sigma);
  c_att->add_option("--m", aa.m);
  c_att->add_flag("--clamp-away", aa.clamp_away, "Zero tokens moving away from every neighbour");
  c_att->add_option("--model", aa.model)->required();
  c_att->add_option("--vocab", aa.vocab)->required();
  c_att->add_option("--input", aa.input)->required();
  c_att->add_option("--out", aa.out)->capture_default_str();
  c_att->add_option("--limit", aa.limit, "First N examples, 0 for all")->capture_default_str();
  c_att->callback([&] { status = run_attack(aa); });

  ReportArgs ra;
  auto* c_rep = app.add_subcommand("report", "Render adversarial examples as a heatmap");
  c_rep->add_option("--adv", ra.adv)->required();
  c_rep->add_option("--model", ra.model)->required();
  c_rep->add_option("--vocab", ra.vocab)->required();
  c_rep->add_option("--format", ra.format)->check(CLI::IsMember({"html", "ansi", "json"}))->capture_default_str();
  c_rep->add_option("--out", ra.out)->capture_default_str();
  c_rep->callback([&] { status = run_report(ra); });

  NeighborArgs na;
  auto* c_nb = app.add_subcommand("dump-neighbors", "Print nearest neighbours as JSON");
  c_nb->add_option("--model", na.model)->required();
  c_nb->add_option("--vocab", na.vocab)->required();
  c_nb->add_option("--word", na.words, "Repeatable; all words when absent");
  c_nb->add_option("--k", na.k)->capture_default_str();
  c_nb->add_option("--out", na.out)->capture_default_str();
  c_nb->callback([&] { status = run_dump_neighbors(na); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::kUsage ? 2 : 1;
  }
  return status;
}
