#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <advtext/nn.hpp>
#include <advtext/trainer.hpp>

namespace advtext::cli {

enum class TrainMode { kBaseline, kPretrained, kAdvT, kIAdvT, kSpgd };

TrainMode parse_train_mode(const std::string& name);
std::string to_string(TrainMode mode);

struct RunConfig {
  std::filesystem::path train_tsv;
  std::filesystem::path test_tsv;
  std::optional<std::filesystem::path> vocab;  // built from train_tsv when absent
  std::size_t min_freq = 2;
  double dev_fraction = 0.15;

  ClassifierDims dims{0, 16, 32, 30};
  std::optional<std::filesystem::path> lm;  // required by pretrained

  TrainConfig train;
  std::optional<std::filesystem::path> checkpoint;
};

/// Reads a train.toml. Sections: [data], [model], [train], [attack],
/// [output]; missing keys keep their defaults. The attack section starts from
/// the method defaults of `mode` and is ignored by baseline/pretrained.
RunConfig load_run_config(const std::filesystem::path& path, TrainMode mode);

}  // namespace advtext::cli
