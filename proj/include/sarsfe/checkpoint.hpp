#pragma once

// Checkpoint directory layout (`ckpt_<step>/`):
//   student.<tensor>.sfet, teacher.<tensor>.sfet, adam_m.<tensor>.sfet, adam_v.<tensor>.sfet
//   config.json   resolved run configuration
//   state.json    {"step", "batch", "seed"}; the sample streams are keyed on these

#include <filesystem>
#include <string>

#include "sarsfe/config.hpp"
#include "sarsfe/trainer.hpp"

namespace sarsfe {

struct Checkpoint {
  RunConfig config;
  TrainState state;
};

std::filesystem::path checkpoint_dir_name(const std::filesystem::path& output_dir, std::uint64_t step);

/// Writes into a temporary sibling and renames it into place.
void save_checkpoint(const std::filesystem::path& dir, const RunConfig& config, const TrainState& state);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Student network only; cheaper than load_checkpoint for feature extraction.
ModelParams<float> load_student(const std::filesystem::path& dir);

template <typename T>
void save_params(const std::filesystem::path& dir, const std::string& prefix, const ModelParams<T>& params);
/// `params` must already have the expected shapes; every tensor is checked against them.
template <typename T>
void load_params(const std::filesystem::path& dir, const std::string& prefix, ModelParams<T>& params);

}  // namespace sarsfe
