#include "train_config.hpp"

#include <initializer_list>
#include <string_view>

#include <toml.hpp>

#include <advtext/error.hpp>

namespace advtext::cli {
namespace {

void check_keys(const toml::table& table, std::string_view section,
                std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, node] : table) {
    bool known = false;
    for (auto a : allowed) known = known || key.str() == a;
    if (!known) {
      throw Error(ErrorKind::kInvalidConfig,
                  "unknown key '" + std::string(key.str()) + "' in [" + std::string(section) + "]");
    }
  }
}

const toml::table* section(const toml::table& root, std::string_view name) {
  const auto* node = root.get(name);
  if (!node) return nullptr;
  if (!node->is_table()) throw Error(ErrorKind::kInvalidConfig, "[" + std::string(name) + "] must be a table");
  return node->as_table();
}

template <typename T>
void read(const toml::table* t, std::string_view key, T& out) {
  if (!t) return;
  const auto* node = t->get(key);
  if (!node) return;
  if constexpr (std::is_same_v<T, bool>) {
    const auto v = node->value<bool>();
    if (!v) throw Error(ErrorKind::kInvalidConfig, std::string(key) + " must be a boolean");
    out = *v;
  } else if constexpr (std::is_floating_point_v<T>) {
    const auto v = node->value<double>();
    if (!v) throw Error(ErrorKind::kInvalidConfig, std::string(key) + " must be a number");
    out = *v;
  } else if constexpr (std::is_integral_v<T>) {
    const auto v = node->value<std::int64_t>();
    if (!v || *v < 0) throw Error(ErrorKind::kInvalidConfig, std::string(key) + " must be a non-negative integer");
    out = static_cast<T>(*v);
  } else {
    const auto v = node->value<std::string>();
    if (!v) throw Error(ErrorKind::kInvalidConfig, std::string(key) + " must be a string");
    out = *v;
  }
}

void read_path(const toml::table* t, std::string_view key, std::optional<std::filesystem::path>& out) {
  std::string s;
  read(t, key, s);
  if (!s.empty()) out = s;
}

}  // namespace

TrainMode parse_train_mode(const std::string& name) {
  if (name == "baseline") return TrainMode::kBaseline;
  if (name == "pretrained") return TrainMode::kPretrained;
  if (name == "advt") return TrainMode::kAdvT;
  if (name == "iadvt") return TrainMode::kIAdvT;
  if (name == "spgd") return TrainMode::kSpgd;
  throw Error(ErrorKind::kUsage, "unknown mode '" + name + "'");
}

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kBaseline: return "baseline";
    case TrainMode::kPretrained: return "pretrained";
    case TrainMode::kAdvT: return "advt";
    case TrainMode::kIAdvT: return "iadvt";
    case TrainMode::kSpgd: return "spgd";
  }
  return "?";
}

RunConfig load_run_config(const std::filesystem::path& path, TrainMode mode) {
  toml::table root;
  try {
    root = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw Error(ErrorKind::kInvalidConfig, path.string() + ": " + std::string(e.description()));
  }
  check_keys(root, "", {"data", "model", "train", "attack", "output"});

  RunConfig rc;
  const auto* data = section(root, "data");
  if (data) check_keys(*data, "data", {"train", "test", "vocab", "min_freq", "dev_fraction"});
  std::string train_tsv, test_tsv;
  read(data, "train", train_tsv);
  read(data, "test", test_tsv);
  if (train_tsv.empty() || test_tsv.empty()) {
    throw Error(ErrorKind::kInvalidConfig, "[data] needs train and test");
  }
  rc.train_tsv = train_tsv;
  rc.test_tsv = test_tsv;
  read_path(data, "vocab", rc.vocab);
  read(data, "min_freq", rc.min_freq);
  read(data, "dev_fraction", rc.dev_fraction);
  if (!(rc.dev_fraction > 0.0 && rc.dev_fraction < 1.0)) {
    throw Error(ErrorKind::kInvalidConfig, "dev_fraction must be in (0, 1)");
  }

  const auto* model = section(root, "model");
  if (model) check_keys(*model, "model", {"embed_dim", "hidden_dim", "head_dim", "lm", "init"});
  read(model, "embed_dim", rc.dims.embed_dim);
  read(model, "hidden_dim", rc.dims.hidden_dim);
  read(model, "head_dim", rc.dims.head_dim);
  read_path(model, "lm", rc.lm);
  std::string init = "lecun";
  read(model, "init", init);
  if (init == "lecun") {
    rc.train.init = InitScheme::kLecunGaussian;
  } else if (init == "uniform") {
    rc.train.init = InitScheme::kUniform01;
  } else {
    throw Error(ErrorKind::kInvalidConfig, "init must be lecun or uniform");
  }
  if (mode == TrainMode::kPretrained && !rc.lm) {
    throw Error(ErrorKind::kInvalidConfig, "pretrained mode needs [model] lm");
  }

  const auto* train = section(root, "train");
  if (train) {
    check_keys(*train, "train", {"epochs", "batch_size", "lambda", "clip_norm", "patience", "seed",
                                 "learning_rate", "lr_decay"});
  }
  read(train, "epochs", rc.train.epochs);
  read(train, "batch_size", rc.train.batch_size);
  read(train, "lambda", rc.train.lambda);
  read(train, "clip_norm", rc.train.clip_norm);
  read(train, "patience", rc.train.patience);
  read(train, "seed", rc.train.seed);
  read(train, "learning_rate", rc.train.adam.learning_rate);
  read(train, "lr_decay", rc.train.adam.lr_decay);

  const auto* attack = section(root, "attack");
  if (attack) {
    check_keys(*attack, "attack", {"epsilon", "k", "sigma", "m", "refresh_interval", "clamp_away_moves"});
  }
  if (mode == TrainMode::kAdvT || mode == TrainMode::kIAdvT || mode == TrainMode::kSpgd) {
    const AttackMethod method = mode == TrainMode::kAdvT    ? AttackMethod::kAdvT
                                : mode == TrainMode::kIAdvT ? AttackMethod::kIAdvT
                                                            : AttackMethod::kSpgd;
    AttackConfig a = AttackConfig::defaults(method);
    read(attack, "epsilon", a.epsilon);
    read(attack, "k", a.k_neighbors);
    read(attack, "sigma", a.sigma);
    read(attack, "m", a.m_steps);
    read(attack, "refresh_interval", a.refresh_interval);
    read(attack, "clamp_away_moves", a.clamp_away_moves);
    rc.train.attack = a;
  }

  const auto* output = section(root, "output");
  if (output) check_keys(*output, "output", {"checkpoint"});
  read_path(output, "checkpoint", rc.checkpoint);

  rc.train.validate();
  return rc;
}

}  // namespace advtext::cli
