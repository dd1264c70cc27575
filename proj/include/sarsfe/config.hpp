#pragma once

// Run configuration: one JSON document with the sections
// data, augment, encoder, loss, train, eval plus output_dir and seed.
// Parsing is strict; any unknown key is rejected with its JSON path.

#include <cstdint>
#include <filesystem>
#include <string>

#include "sarsfe/augment.hpp"
#include "sarsfe/encoder.hpp"
#include "sarsfe/evaluate.hpp"
#include "sarsfe/objective.hpp"
#include "sarsfe/trainer.hpp"

namespace sarsfe {

struct DataConfig {
  std::filesystem::path manifest;  // manifest.json, or
  std::filesystem::path root;      // a directory scanned with build_manifest
};

struct RunConfig {
  DataConfig data;
  AugmentConfig augment;
  EncoderConfig encoder;
  LossConfig loss;
  TrainConfig train;
  EvalConfig eval;
  std::filesystem::path output_dir = "run";
  std::uint64_t seed = 0;

  void validate() const;
};

/// Missing keys keep their defaults. train.seed and augment.rng_seed default to `seed`.
/// Relative paths are resolved against `base_dir` when it is non-empty.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Every field written out, defaults included.
std::string run_config_to_json(const RunConfig& cfg);

/// Writes `<output_dir>/config.resolved.json` and returns its path.
std::filesystem::path write_resolved_config(const RunConfig& cfg);

/// Manifest named by data.manifest or, failing that, scanned from data.root.
DatasetManifest load_dataset(const RunConfig& cfg);

}  // namespace sarsfe
