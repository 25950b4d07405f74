#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "adacon/data.hpp"
#include "adacon/trainer.hpp"

namespace adacon {

using KeyValues = std::map<std::string, std::string>;

/// Everything needed to reproduce one run: data source, split, training
/// hyperparameters and output location.
struct RunConfig {
  std::optional<std::filesystem::path> data_path;  // CSV; otherwise `generator` is used
  GeneratorSpec generator{};
  std::uint64_t split_seed = 0;
  TrainConfig train{};
  std::filesystem::path out_root = "runs";
  std::string run_id = "run";
};

/// Applies keys on top of `config`. Unknown keys or unparsable values throw Error.
void apply_key_values(RunConfig& config, const KeyValues& values);

/// Every field, fully resolved; feeding this back through apply_key_values
/// reproduces the same configuration.
KeyValues to_key_values(const RunConfig& config);

void write_key_values(const std::filesystem::path& path, const KeyValues& values);

/// Dataset named by the config, split 70/15/15 with split_seed.
DatasetSplits load_splits(const RunConfig& config);

}  // namespace adacon
