#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "sarsfe/augment.hpp"
#include "sarsfe/encoder.hpp"
#include "sarsfe/objective.hpp"
#include "sarsfe/sar_data.hpp"

namespace sarsfe {

struct RunConfig;

struct TrainConfig {
  std::uint32_t epochs = 30;
  std::uint32_t batch_size = 32;
  float learning_rate = 1e-3f;
  std::optional<std::uint32_t> warmup_steps;  // default: 10% of the scheduled steps
  float min_learning_rate = 1e-6f;
  float momentum = 0.996f;
  bool momentum_ramp = false;  // cosine ramp of m towards 1.0
  float weight_decay = 0.04f;
  float adam_beta1 = 0.9f;
  float adam_beta2 = 0.999f;
  float adam_eps = 1e-8f;
  std::uint64_t seed = 0;
  std::uint32_t checkpoint_every = 0;  // 0 = only the final checkpoint
  std::optional<std::uint64_t> max_steps;

  void validate() const;
  /// Full-scale schedule: 600 epochs.
  static TrainConfig full();
};

struct StepMetrics {
  std::uint64_t step = 0;  // 1-based index of the completed update
  double loss = 0;
  double l_sim = 0;
  double r = 0;
  double lr = 0;
  double momentum = 0;
};

/// Optimizer moments exist for the student only; the teacher is never optimized.
struct TrainState {
  std::uint64_t step = 0;   // completed updates
  std::uint64_t batch = 0;  // batches consumed, including failed ones
  ModelParams<float> student;
  ModelParams<float> teacher;
  ModelParams<float> adam_m;
  ModelParams<float> adam_v;
  std::deque<StepMetrics> metrics;  // most recent first-in-first-out window

  static constexpr std::size_t kMetricsWindow = 1024;

  /// Student from init(cfg, seed); teacher an exact copy; zero moments.
  static TrainState initial(const EncoderConfig& cfg, std::uint64_t seed);
};

/// Schedules over `total_steps` updates.
double learning_rate_at(const TrainConfig& cfg, std::uint64_t step, std::uint64_t total_steps);
double momentum_at(const TrainConfig& cfg, std::uint64_t step, std::uint64_t total_steps);
std::uint32_t warmup_steps_for(const TrainConfig& cfg, std::uint64_t total_steps);

/// theta_t <- m theta_t + (1 - m) theta_s for every tensor.
template <typename T>
void ema_update(ModelParams<T>& teacher, const ModelParams<T>& student, T m);

/// Tensors subject to decoupled weight decay: matrix weights of linear layers.
bool is_decayed(const std::string& tensor_name);

/// One update: views -> loss -> student backprop -> AdamW -> EMA. On a numerical failure
/// the state is left exactly as it was and NumericalError is rethrown. `total_steps`
/// drives the schedules.
StepMetrics train_step(TrainState& state, std::span<const SlcImage> batch, const TrainConfig& cfg,
                       const AugmentConfig& acfg, const LossConfig& lcfg, std::uint64_t total_steps,
                       unsigned threads = 0);

struct FitOptions {
  std::optional<std::filesystem::path> resume_from;
  unsigned threads = 0;
};

struct FitResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path metrics_csv;
  std::uint64_t steps = 0;
  std::uint64_t failed_steps = 0;
};

/// Epoch loop over a manifest with per-(seed, epoch) shuffling, metrics CSV
/// (`<output_dir>/metrics.csv`) and checkpoints (`<output_dir>/ckpt_<step>`).
FitResult fit(const DatasetManifest& manifest, const RunConfig& config, const FitOptions& options = {});

std::uint64_t steps_per_epoch(std::size_t dataset_size, std::uint32_t batch_size);

}  // namespace sarsfe
