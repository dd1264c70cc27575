#include "sarsfe/trainer.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "sarsfe/checkpoint.hpp"
#include "sarsfe/config.hpp"
#include "sarsfe/error.hpp"
#include "sarsfe/log.hpp"
#include "sarsfe/parallel.hpp"
#include "sarsfe/rng.hpp"

namespace sarsfe {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorKind::Parameter, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorKind::Parameter, "batch_size must be >= 1");
  if (!(momentum >= 0.0f && momentum <= 1.0f)) throw Error(ErrorKind::Parameter, "momentum must be in [0, 1]");
  if (!(learning_rate >= 0.0f) || !(min_learning_rate >= 0.0f)) {
    throw Error(ErrorKind::Parameter, "learning rates must be non-negative");
  }
  if (!(weight_decay >= 0.0f)) throw Error(ErrorKind::Parameter, "weight_decay must be non-negative");
  if (!(adam_beta1 >= 0.0f && adam_beta1 < 1.0f) || !(adam_beta2 >= 0.0f && adam_beta2 < 1.0f)) {
    throw Error(ErrorKind::Parameter, "adam betas must be in [0, 1)");
  }
  if (!(adam_eps > 0.0f)) throw Error(ErrorKind::Parameter, "adam_eps must be positive");
}

TrainConfig TrainConfig::full() {
  TrainConfig c;
  c.epochs = 600;
  return c;
}

TrainState TrainState::initial(const EncoderConfig& cfg, std::uint64_t seed) {
  TrainState s;
  s.student = ModelParams<float>::init(cfg, seed);
  s.teacher = s.student;
  s.adam_m = ModelParams<float>::zeros(cfg);
  s.adam_v = ModelParams<float>::zeros(cfg);
  return s;
}

std::uint32_t warmup_steps_for(const TrainConfig& cfg, std::uint64_t total_steps) {
  if (cfg.warmup_steps) return *cfg.warmup_steps;
  return static_cast<std::uint32_t>(total_steps / 10);
}

double learning_rate_at(const TrainConfig& cfg, std::uint64_t step, std::uint64_t total_steps) {
  const double base = cfg.learning_rate;
  const double floor = std::min<double>(cfg.min_learning_rate, base);
  const std::uint64_t warmup = warmup_steps_for(cfg, total_steps);
  if (step < warmup) return base * static_cast<double>(step + 1) / static_cast<double>(warmup);
  const std::uint64_t span = total_steps > warmup ? total_steps - warmup : 1;
  const double t = std::min(1.0, static_cast<double>(step - warmup) / static_cast<double>(span));
  return floor + 0.5 * (base - floor) * (1.0 + std::cos(std::numbers::pi * t));
}

double momentum_at(const TrainConfig& cfg, std::uint64_t step, std::uint64_t total_steps) {
  const double m = cfg.momentum;
  if (!cfg.momentum_ramp || total_steps == 0) return m;
  const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
  return 1.0 - (1.0 - m) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

template <typename T>
void ema_update(ModelParams<T>& teacher, const ModelParams<T>& student, T m) {
  check_same_shape(teacher, student);
  if (!(m >= T(0) && m <= T(1))) throw Error(ErrorKind::Parameter, "EMA momentum must be in [0, 1]");
  auto dst = teacher.named_tensors();
  const auto src = student.named_tensors();
  const T keep = m;
  const T take = T(1) - m;
  for (std::size_t i = 0; i < dst.size(); ++i) {
    Mat<T>& t = *dst[i].value;
    const Mat<T>& s = *src[i].value;
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = keep * t.data()[k] + take * s.data()[k];
  }
}

template void ema_update<float>(ModelParams<float>&, const ModelParams<float>&, float);
template void ema_update<double>(ModelParams<double>&, const ModelParams<double>&, double);

bool is_decayed(const std::string& name) {
  if (name == "prototypes" || name == "cls_token") return false;
  if (name.find("norm") != std::string::npos) return false;
  return name.ends_with(".weight");
}

StepMetrics train_step(TrainState& state, std::span<const SlcImage> batch, const TrainConfig& cfg,
                       const AugmentConfig& acfg, const LossConfig& lcfg, std::uint64_t total_steps,
                       unsigned threads) {
  if (batch.empty()) throw Error(ErrorKind::Parameter, "empty batch");
  cfg.validate();
  const double lr = learning_rate_at(cfg, state.step, total_steps);
  const double m = momentum_at(cfg, state.step, total_steps);

  std::vector<ViewSet> views(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    Rng rng(hash_keys({cfg.seed, acfg.rng_seed, state.step, i}));
    views[i] = make_views(batch[i], acfg, rng, state.student.config.patch_size);
  });

  const LossGradients<float> lg = loss_gradients<float>(views, state.student, state.teacher, lcfg, threads);

  ModelParams<float> student = state.student;
  ModelParams<float> adam_m = state.adam_m;
  ModelParams<float> adam_v = state.adam_v;
  {
    const double b1 = cfg.adam_beta1;
    const double b2 = cfg.adam_beta2;
    const double t = static_cast<double>(state.step + 1);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    auto p = student.named_tensors();
    auto mm = adam_m.named_tensors();
    auto vv = adam_v.named_tensors();
    const auto g = lg.grads.named_tensors();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double wd = is_decayed(p[i].name) ? cfg.weight_decay : 0.0;
      float* pd = p[i].value->data();
      float* md = mm[i].value->data();
      float* vd = vv[i].value->data();
      const float* gd = g[i].value->data();
      for (Eigen::Index k = 0; k < p[i].value->size(); ++k) {
        const double gk = gd[k];
        const double mk = b1 * md[k] + (1.0 - b1) * gk;
        const double vk = b2 * vd[k] + (1.0 - b2) * gk * gk;
        md[k] = static_cast<float>(mk);
        vd[k] = static_cast<float>(vk);
        const double update = (mk / c1) / (std::sqrt(vk / c2) + cfg.adam_eps) + wd * pd[k];
        pd[k] = static_cast<float>(pd[k] - lr * update);
      }
    }
  }
  for (const auto& t : student.named_tensors()) {
    if (!t.value->allFinite()) throw NumericalError("non-finite parameter after update", t.name);
  }
  ModelParams<float> teacher = state.teacher;
  ema_update(teacher, student, static_cast<float>(m));

  state.student = std::move(student);
  state.teacher = std::move(teacher);
  state.adam_m = std::move(adam_m);
  state.adam_v = std::move(adam_v);
  ++state.step;

  StepMetrics sm{state.step, lg.value.loss, lg.value.l_sim, lg.value.r, lr, m};
  state.metrics.push_back(sm);
  while (state.metrics.size() > TrainState::kMetricsWindow) state.metrics.pop_front();
  return sm;
}

std::uint64_t steps_per_epoch(std::size_t dataset_size, std::uint32_t batch_size) {
  if (batch_size == 0) throw Error(ErrorKind::Parameter, "batch_size must be >= 1");
  return (dataset_size + batch_size - 1) / batch_size;
}

namespace {

constexpr const char* kMetricsHeader = "step,loss,l_sim,r,lr,m\n";
constexpr std::uint64_t kShuffleKey = 0x53485546464c45ULL;
constexpr int kMaxConsecutiveFailures = 10;

std::string metrics_row(const StepMetrics& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%" PRIu64 ",%.9g,%.9g,%.9g,%.9g,%.9g\n", s.step, s.loss, s.l_sim, s.r, s.lr,
                s.momentum);
  return buf;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(hash_keys({seed, epoch, kShuffleKey}));
  shuffle(std::span(order), rng);
  return order;
}

// Keeps the header and every row up to `step` from an earlier run's metrics file.
std::string truncated_metrics(const fs::path& path, std::uint64_t step) {
  std::string out = kMetricsHeader;
  std::ifstream in(path);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    if (std::stoull(line.substr(0, line.find(','))) > step) break;
    out += line + "\n";
  }
  return out;
}

}  // namespace

FitResult fit(const DatasetManifest& manifest, const RunConfig& config, const FitOptions& options) {
  config.validate();
  if (manifest.entries.empty()) throw Error(ErrorKind::EmptyDataset, "training manifest is empty");
  const TrainConfig& tc = config.train;
  const std::size_t n = manifest.entries.size();
  const std::uint64_t per_epoch = steps_per_epoch(n, tc.batch_size);
  const std::uint64_t total_batches = per_epoch * tc.epochs;

  TrainState state;
  if (options.resume_from) {
    Checkpoint ck = load_checkpoint(*options.resume_from);
    if (!(ck.config.encoder == config.encoder)) {
      throw Error(ErrorKind::Config, "checkpoint encoder does not match the run configuration");
    }
    state = std::move(ck.state);
    log_info("resuming from " + options.resume_from->string() + " at step " + std::to_string(state.step));
  } else {
    state = TrainState::initial(config.encoder, tc.seed);
  }

  fs::create_directories(config.output_dir);
  FitResult result;
  result.metrics_csv = config.output_dir / "metrics.csv";
  {
    const std::string head = options.resume_from ? truncated_metrics(result.metrics_csv, state.step) : kMetricsHeader;
    std::ofstream(result.metrics_csv, std::ios::binary | std::ios::trunc) << head;
  }
  std::FILE* metrics = std::fopen(result.metrics_csv.c_str(), "ab");
  if (metrics == nullptr) throw Error(ErrorKind::File, "cannot open " + result.metrics_csv.string());
  struct Closer {
    std::FILE* f;
    ~Closer() { std::fclose(f); }
  } closer{metrics};

  std::set<std::size_t> unreadable;
  std::uint64_t cached_epoch = UINT64_MAX;
  std::vector<std::size_t> order;
  std::uint64_t last_saved = UINT64_MAX;
  int consecutive_failures = 0;

  while (state.batch < total_batches && !(tc.max_steps && state.step >= *tc.max_steps)) {
    const std::uint64_t epoch = state.batch / per_epoch;
    const std::uint64_t pos = state.batch % per_epoch;
    if (epoch != cached_epoch) {
      order = epoch_order(n, tc.seed, epoch);
      cached_epoch = epoch;
    }
    const std::size_t begin = static_cast<std::size_t>(pos * tc.batch_size);
    const std::size_t end = std::min(n, begin + tc.batch_size);

    std::vector<SlcImage> images;
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t idx = order[k];
      if (unreadable.count(idx)) continue;
      try {
        images.push_back(load_sample(manifest.entries[idx].path));
      } catch (const std::exception& e) {
        unreadable.insert(idx);
        log_warn("skipping " + manifest.entries[idx].id + ": " + e.what());
        if (unreadable.size() * 10 > n) {
          throw Error(ErrorKind::Protocol, "more than 10% of the training samples are unreadable");
        }
      }
    }
    ++state.batch;
    if (images.empty()) continue;

    try {
      const StepMetrics sm =
          train_step(state, images, tc, config.augment, config.loss, total_batches, options.threads);
      consecutive_failures = 0;
      const std::string row = metrics_row(sm);
      std::fwrite(row.data(), 1, row.size(), metrics);
      std::fflush(metrics);
      if (sm.step % 10 == 0 || sm.step == 1) {
        std::ostringstream msg;
        msg << "epoch " << epoch + 1 << "/" << tc.epochs << " step " << sm.step << " loss " << sm.loss
            << " l_sim " << sm.l_sim << " r " << sm.r;
        log_info(msg.str());
      }
      if (tc.checkpoint_every > 0 && state.step % tc.checkpoint_every == 0) {
        save_checkpoint(checkpoint_dir_name(config.output_dir, state.step), config, state);
        last_saved = state.step;
      }
    } catch (const NumericalError& e) {
      ++result.failed_steps;
      log_warn(std::string("step rolled back: ") + e.what());
      if (++consecutive_failures >= kMaxConsecutiveFailures) {
        throw Error(ErrorKind::Numerical, "aborting after repeated numerical failures");
      }
    }
  }

  result.final_checkpoint = checkpoint_dir_name(config.output_dir, state.step);
  if (last_saved != state.step) save_checkpoint(result.final_checkpoint, config, state);
  result.steps = state.step;
  return result;
}

}  // namespace sarsfe
